"""Command line interface: single runs, parameter sweeps, coloring checks and the bound."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from statistics import fmean

import numpy as np

from .analysis import bad_scenario_bound
from .engine import ALGORITHMS, RunConfig, RoundCapExceeded, run
from .firstfit import IncompleteColoringError, verify_coloring
from .topology import TopologyError, generate_udg, load_topology

SWEEP_HEADER = ["n", "density", "algo", "colors", "rounds", "msgs_per_node", "bytes_per_node", "seed_base"]
DEFAULT_NODES = (50, 100, 150, 200)
DEFAULT_DENSITIES = tuple(range(8, 45, 2)) + (45,)
SEED_ENV = "OSERENA_SEED"


@dataclass(frozen=True)
class SweepSpec:
    nodes: tuple[int, ...] = DEFAULT_NODES
    densities: tuple[float, ...] = DEFAULT_DENSITIES
    runs: int = 10
    algorithms: tuple[str, ...] = ("serena", "oserena")
    master_seed: int = 0
    size_mp1: int = 4
    size_mp2: int = 3
    loss_rate: float = 0.0
    r6_threshold: int = 2

    def __post_init__(self):
        if not self.nodes or not self.densities or not self.algorithms:
            raise ValueError("sweep needs at least one node count, density and algorithm")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        for algo in self.algorithms:
            if algo not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {algo!r}")


def cell_seed(master_seed: int, n: int, density: float) -> int:
    """Seed of run 0 in cell (n, density); run i uses cell_seed + i."""
    seq = np.random.SeedSequence([master_seed, n, round(density * 1000)])
    return int(seq.generate_state(1, dtype=np.uint32)[0])


def _run_cell(args) -> list[dict]:
    spec, n, density = args
    base = cell_seed(spec.master_seed, n, density)
    per_algo = {algo: [] for algo in spec.algorithms}
    for i in range(spec.runs):
        topo = generate_udg(n, density, base + i)
        for algo in spec.algorithms:
            config = RunConfig(
                algorithm=algo,
                size_mp1=spec.size_mp1,
                size_mp2=spec.size_mp2,
                loss_rate=spec.loss_rate,
                r6_threshold=spec.r6_threshold,
                seed=base + i,
            )
            per_algo[algo].append(run(topo, config))
    rows = []
    for algo, results in per_algo.items():
        rows.append(
            {
                "n": n,
                "density": density,
                "algo": algo,
                "colors": fmean(r.colors_used for r in results),
                "rounds": fmean(r.rounds for r in results),
                "msgs_per_node": fmean(r.avg_messages_per_node for r in results),
                "bytes_per_node": fmean(r.avg_bytes_per_node for r in results),
                # JSON only; the CSV layout is fixed
                "max_message_bytes": max(r.max_message_bytes for r in results),
                "seed_base": base,
            }
        )
    return rows


def sweep(spec: SweepSpec, jobs: int = 1) -> list[dict]:
    """Mean metrics per (n, density, algorithm) cell, in spec order."""
    cells = [(spec, n, d) for n in spec.nodes for d in spec.densities]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            chunks = list(pool.map(_run_cell, cells))
    else:
        chunks = [_run_cell(cell) for cell in cells]
    return [row for chunk in chunks for row in chunk]


def _fmt_number(x) -> str:
    if isinstance(x, float):
        return repr(int(x)) if x.is_integer() and abs(x) < 1e15 else f"{x:.4f}"
    return str(x)


def sweep_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for row in rows:
        writer.writerow(
            [
                row["n"],
                _fmt_number(float(row["density"])),
                row["algo"],
                f"{row['colors']:.4f}",
                f"{row['rounds']:.4f}",
                f"{row['msgs_per_node']:.4f}",
                f"{row['bytes_per_node']:.4f}",
                row["seed_base"],
            ]
        )
    return buf.getvalue()


def master_seed(cli_value: int) -> int:
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return cli_value
    try:
        return int(env)
    except ValueError:
        raise SystemExit(f"error: {SEED_ENV} must be an integer, got {env!r}") from None


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _flatten(values) -> list:
    return [x for chunk in values for x in chunk]


def cmd_run(args) -> int:
    seed = master_seed(args.seed)
    if args.topo is not None:
        topo = load_topology(args.topo)
    else:
        topo = generate_udg(args.nodes, args.density, seed)
    config = RunConfig(
        algorithm=args.algo,
        size_mp1=args.mp1,
        size_mp2=args.mp2,
        loss_rate=args.loss_rate,
        r6_threshold=args.r6_n,
        seed=seed,
    )
    result = run(topo, config)
    check = verify_coloring(topo, result.coloring)
    if args.format == "csv":
        lines = ["node,color,round"]
        lines += [f"{u},{result.coloring[u]},{result.color_round[u]}" for u in topo.addresses]
        _emit("\n".join(lines) + "\n", args.out)
    else:
        payload = result.to_dict()
        payload["valid"] = check.valid
        _emit(json.dumps(payload, indent=1, sort_keys=True) + "\n", args.out)
    if args.out is not None:
        print(
            f"{args.algo}: {len(topo)} nodes, {result.colors_used} colors, "
            f"{result.rounds} rounds, valid={check.valid} -> {args.out}"
        )
    return 0 if check.valid else 1


def cmd_sweep(args) -> int:
    spec = SweepSpec(
        nodes=tuple(_flatten(args.nodes)) if args.nodes else DEFAULT_NODES,
        densities=tuple(_flatten(args.density)) if args.density else DEFAULT_DENSITIES,
        runs=args.runs,
        algorithms=tuple(_flatten(args.algo)) if args.algo else ("serena", "oserena"),
        master_seed=master_seed(args.seed),
        size_mp1=args.mp1,
        size_mp2=args.mp2,
        loss_rate=args.loss_rate,
        r6_threshold=args.r6_n,
    )
    rows = sweep(spec, jobs=args.jobs)
    if args.format == "json":
        _emit(json.dumps(rows, indent=1) + "\n", args.out)
    else:
        _emit(sweep_csv(rows), args.out)
    return 0


def _load_coloring(path: str) -> dict[int, int]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict) and "coloring" in data:
        data = data["coloring"]
    if isinstance(data, list):
        return dict(enumerate(data))
    return {int(k): v for k, v in data.items()}


def cmd_verify(args) -> int:
    topo = load_topology(args.topology)
    coloring = _load_coloring(args.coloring)
    unknown = sorted(set(coloring) - set(topo.addresses))
    if unknown:
        print(f"invalid: coloring names nodes absent from the topology: {unknown[:10]}")
        return 1
    try:
        check = verify_coloring(topo, coloring, h=args.hops)
    except IncompleteColoringError as exc:
        print(f"invalid: {exc}")
        return 1
    if check.valid:
        print(f"valid: {len(topo)} nodes, {len(set(coloring.values()))} colors")
        return 0
    for u, v in check.violations:
        print(f"conflict: {u} {v} share color {coloring[u]}")
    return 1


def cmd_bound(args) -> int:
    print(f"{bad_scenario_bound(args.m):.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wsncolor", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def protocol_flags(p):
        p.add_argument("--mp1", type=int, default=4, help="max_prio1 list size")
        p.add_argument("--mp2", type=int, default=3, help="max_prio2 list size")
        p.add_argument("--loss-rate", type=float, default=0.0)
        p.add_argument("--r6-n", type=int, default=2, help="silent rounds before a neighbor is evicted")
        p.add_argument("--seed", type=int, default=0, help=f"master seed (env {SEED_ENV} overrides)")
        p.add_argument("--out", help="output file (default: stdout)")

    p = sub.add_parser("run", help="simulate one network")
    p.add_argument("--algo", choices=ALGORITHMS, default="oserena")
    p.add_argument("--nodes", type=int, default=100)
    p.add_argument("--density", type=float, default=10.0)
    p.add_argument("--topo", help="topology file instead of a generated network")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    protocol_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="average metrics over a grid of networks")
    p.add_argument("--algo", type=lambda s: s.split(","), action="append", help="comma separated")
    p.add_argument("--nodes", type=_int_list, action="append")
    p.add_argument("--density", type=_float_list, action="append")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    protocol_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="check a coloring against a topology")
    p.add_argument("topology")
    p.add_argument("coloring", help="JSON: run result, {node: color} or a list")
    p.add_argument("--hops", type=int, default=3)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bound", help="bad-scenario probability bound")
    p.add_argument("--m", type=float, required=True, help="mean number of 1-hop neighbors")
    p.set_defaults(func=cmd_bound)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (TopologyError, OSError, ValueError, RoundCapExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
