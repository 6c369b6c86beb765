"""Synchronous round scheduler for the distributed coloring algorithms.

Within round ``r`` every active node broadcasts the message it built at the
end of round ``r - 1``; each node then processes everything it received and
may color itself. Decisions made in round ``r`` are only visible to others
from round ``r + 1`` on.

Before the first coloring round the nodes run Hello discovery and two
initialization exchanges of Color messages (reliable, no coloring allowed),
after which every node's lists or tables cover its whole 3-hop neighborhood.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from .firstfit import colors_used, firstfit_3hop
from .oserena import ColorMessage, NodeState
from .priority import Priority, address_of, priority_map
from .serena import SerenaMessage, SerenaNode
from .topology import Topology, is_connected

log = logging.getLogger(__name__)

ALGORITHMS = ("serena", "oserena", "oracle")
INIT_ROUNDS = 2


class RoundCapExceeded(RuntimeError):
    """The run did not terminate within the round cap; ``dump`` holds the node states."""

    def __init__(self, message: str, dump: dict):
        super().__init__(message)
        self.dump = dump


class InvariantViolation(AssertionError):
    pass


@dataclass(frozen=True)
class FieldSizes:
    address: int = 2
    prio: int = 2
    color: int = 1


@dataclass(frozen=True)
class RunConfig:
    algorithm: str = "oserena"
    size_mp1: int = 4
    size_mp2: int = 3
    loss_rate: float = 0.0
    r6_threshold: int = 2
    seed: int = 0
    fields: FieldSizes = FieldSizes()
    round_cap: int | None = None
    check_invariants: bool = False
    # (sender, receiver) pairs where only the receiver hears the sender
    heard_links: tuple[tuple[int, int], ...] = ()
    # replaces compute_prio values, e.g. for hand-built scenarios
    prio_override: Mapping[int, int] | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; pick one of {ALGORITHMS}")
        if not 0 <= self.loss_rate < 1:
            raise ValueError("loss_rate must lie in [0, 1)")
        if self.r6_threshold < 2:
            raise ValueError("r6_threshold must be >= 2")
        if self.size_mp1 < 1 or self.size_mp2 < 1:
            raise ValueError("list sizes must be >= 1")


@dataclass
class RunResult:
    algorithm: str
    coloring: dict[int, int]
    color_round: dict[int, int]
    rounds: int
    termination_round: int
    colors_used: int
    avg_messages_per_node: float
    avg_bytes_per_node: float
    max_message_bytes: int
    init_bytes_per_node: float = 0.0
    hello_bytes_per_node: float = 0.0
    priorities: dict[int, tuple[int, int]] = field(default_factory=dict)
    events: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    topology_origin: tuple[int, int] | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        # JSON object keys must be strings
        for name in ("coloring", "color_round", "priorities"):
            out[name] = {str(k): v for k, v in getattr(self, name).items()}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunResult":
        data = dict(data)
        for name in ("coloring", "color_round"):
            data[name] = {int(k): v for k, v in data[name].items()}
        data["priorities"] = {int(k): tuple(v) for k, v in data.get("priorities", {}).items()}
        if data.get("topology_origin") is not None:
            data["topology_origin"] = tuple(data["topology_origin"])
        return cls(**data)


def discover_neighbors(topo: Topology, heard_links=()) -> tuple[dict[int, set[int]], dict[int, int], int]:
    """Two Hello phases over the stable links.

    Phase 1 Hellos carry the sender's list of heard nodes; a link is symmetric
    when each end finds itself in the other's list, which also yields the
    neighbor's degree. Phase 2 Hellos carry that degree sum, i.e. the prio.
    Returns (symmetric neighbor sets, prio per node, total Hello bytes at
    2 bytes per address and per prio).
    """
    heard: dict[int, set[int]] = {u: set(topo.neighbors(u)) for u in topo.addresses}
    for sender, receiver in heard_links:
        heard[receiver].add(sender)
    symmetric = {u: {v for v in heard[u] if u in heard[v]} for u in heard}
    degree = {u: len(vs) for u, vs in symmetric.items()}
    prio = {u: degree[u] + sum(degree[v] for v in symmetric[u]) for u in symmetric}
    hello_bytes = sum(2 * (1 + len(heard[u])) for u in heard) + sum(2 + 2 for _ in heard)
    return symmetric, prio, hello_bytes


def message_size_bytes(msg, fields: FieldSizes = FieldSizes()) -> int:
    """Encoded size of a Color message under the given field sizes.

    OSERENA: every priority (own and listed) costs an address plus a prio,
    then one color field and both bitmaps trimmed to whole bytes. SERENA: one
    (address, prio, color) row per table entry carried.
    """
    if isinstance(msg, ColorMessage):
        n_prios = 1 + len(msg.max_prio1) + len(msg.max_prio2)
        return (
            n_prios * (fields.address + fields.prio)
            + fields.color
            + bitmap_bytes(msg.bitmap1)
            + bitmap_bytes(msg.bitmap2)
        )
    if isinstance(msg, SerenaMessage):
        return msg.n_entries * (fields.address + fields.prio + fields.color)
    raise TypeError(f"not a Color message: {msg!r}")


def bitmap_bytes(bits: int) -> int:
    return (bits.bit_length() + 7) // 8


def max_message_bound(fields: FieldSizes, bitmap1_bytes: int, bitmap2_bytes: int, size_mp1=4, size_mp2=3) -> int:
    """Upper bound on an OSERENA message: all list slots full plus both bitmaps."""
    return (1 + size_mp1 + size_mp2) * (fields.address + fields.prio) + fields.color + bitmap1_bytes + bitmap2_bytes


def run(topo: Topology, config: RunConfig = RunConfig()) -> RunResult:
    if len(topo) == 0:
        raise ValueError("empty topology")
    if not is_connected(topo):
        log.warning("topology is not connected; running anyway")
    neighbors, prios, hello_bytes = discover_neighbors(topo, config.heard_links)
    if config.prio_override is not None:
        priorities = priority_map(topo, config.prio_override)
    else:
        priorities = {u: Priority(prios[u], u) for u in topo.addresses}
    n = len(topo)
    if config.algorithm == "oracle":
        coloring = firstfit_3hop(topo, priorities)
        return RunResult(
            algorithm="oracle",
            coloring=coloring,
            color_round={u: 1 for u in coloring},
            rounds=1,
            termination_round=1,
            colors_used=colors_used(coloring),
            avg_messages_per_node=0.0,
            avg_bytes_per_node=0.0,
            max_message_bytes=0,
            hello_bytes_per_node=hello_bytes / n,
            priorities={u: tuple(p) for u, p in priorities.items()},
            config=_config_dict(config),
            topology_origin=topo.origin,
        )
    return _Simulation(topo, config, neighbors, priorities, hello_bytes).run()


def _config_dict(config: RunConfig) -> dict:
    out = asdict(config)
    out["heard_links"] = [list(p) for p in config.heard_links]
    if config.prio_override is not None:
        out["prio_override"] = {str(k): v for k, v in config.prio_override.items()}
    return out


class _Simulation:
    def __init__(self, topo, config: RunConfig, neighbors, priorities, hello_bytes):
        self.topo = topo
        self.config = config
        self.priorities = priorities
        self.hello_bytes = hello_bytes
        self.order = list(topo.addresses)
        if config.algorithm == "oserena":
            self.nodes = {
                u: NodeState(
                    u,
                    priorities[u].key,
                    neighbors[u],
                    config.size_mp1,
                    config.size_mp2,
                    config.r6_threshold,
                )
                for u in self.order
            }
        else:
            self.nodes = {
                u: SerenaNode(u, priorities[u].key, neighbors[u], config.r6_threshold)
                for u in self.order
            }
        # links over which messages are delivered, fixed by the stable topology
        self.links = {u: sorted(topo.neighbors(u)) for u in self.order}
        self.heard_from: dict[int, list[int]] = {u: [] for u in self.order}
        for sender, receiver in config.heard_links:
            self.heard_from[receiver].append(sender)
        self.rng = np.random.default_rng([config.seed, 0x10_55])
        n = len(self.order)
        self.cap = config.round_cap if config.round_cap is not None else max(50 * n, 100)
        self.previous: dict = {}
        # per receiver: linked neighbors that stopped broadcasting
        self.silent: dict[int, set[int]] = {u: set() for u in self.order}
        self.events: list[dict] = []
        self.color_round: dict[int, int] = {}
        if config.check_invariants:
            self.hops = {u: topo.hop_distances(u, limit=3) for u in self.order}

    def _exchange(self, outgoing: dict, lossy: bool) -> tuple[dict[int, dict], dict | None]:
        """Deliver one round of broadcasts.

        Returns (inboxes, missing). On reliable rounds every receiver already
        holds each sender's previous message, so only changed messages are
        delivered and ``missing`` maps receivers to their silent neighbors.
        Lossy rounds deliver full inboxes and ``missing`` is None.
        """
        inboxes: dict[int, dict] = {u: {} for u in self.order}
        loss = self.config.loss_rate if lossy else 0.0
        previous = self.previous
        self.previous = outgoing
        for u in self.order:
            msg = outgoing.get(u)
            if msg is None:
                continue
            receivers = self.links[u]
            if loss > 0.0:
                kept = self.rng.random(len(receivers)) >= loss
                receivers = [v for v, ok in zip(receivers, kept) if ok]
            elif previous.get(u) is msg:
                continue
            for v in receivers:
                inboxes[v][u] = msg
        return inboxes, (None if loss > 0.0 else self.silent)

    def _heard(self, u: int, outgoing: dict) -> list:
        return [outgoing[s] for s in self.heard_from[u] if s in outgoing]

    def run(self) -> RunResult:
        nodes = self.nodes
        fields = self.config.fields
        init_bytes = 0
        for _ in range(INIT_ROUNDS):
            outgoing = {u: nodes[u].build_message() for u in self.order}
            init_bytes += sum(message_size_bytes(m, fields) for m in outgoing.values())
            inboxes, missing = self._exchange(outgoing, lossy=False)
            for u in self.order:
                nodes[u].step(inboxes[u], self._heard(u, outgoing), False, missing[u])

        messages = 0
        total_bytes = 0
        max_bytes = 0
        r = 0
        while True:
            r += 1
            if r > self.cap:
                raise RoundCapExceeded(
                    f"{self.config.algorithm} did not terminate within {self.cap} rounds",
                    self._dump(r),
                )
            outgoing = {u: nodes[u].build_message() for u in self.order if not nodes[u].stopped}
            for msg in outgoing.values():
                size = message_size_bytes(msg, fields)
                total_bytes += size
                if size > max_bytes:
                    max_bytes = size
            messages += len(outgoing)
            # rule R6 only applies from round 2: round 1 delivery is reliable
            inboxes, missing = self._exchange(outgoing, lossy=r > 1)
            colored = []
            record = {"round": r}
            r3 = []
            r4 = 0
            evictions = []
            stopped = []
            for u in self.order:
                node = nodes[u]
                if node.stopped:
                    continue
                color = node.step(
                    inboxes[u], self._heard(u, outgoing), True, None if missing is None else missing[u]
                )
                if color is not None:
                    colored.append((u, color))
                if node.stopped:
                    stopped.append(u)
                if node.evicted:
                    evictions.extend([u, v] for v in node.evicted)
                if isinstance(node, NodeState):
                    r3.extend([u, p] for p in node.r3_inserted)
                    r4 += node.r4_discards
            for u, _ in colored:
                self.color_round[u] = r
            for u in stopped:
                for v in self.links[u]:
                    self.silent[v].add(u)
            if self.config.check_invariants:
                self._check(r, colored)
            if colored:
                record["colored"] = [list(x) for x in colored]
            if r3:
                record["r3_insertions"] = [[u, address_of(p)] for u, p in r3]
            if r4:
                record["r4_discards"] = r4
            if evictions:
                record["evictions"] = evictions
            if len(record) > 1:
                self.events.append(record)
            if all(node.stopped for node in nodes.values()):
                break

        n = len(self.order)
        coloring = {u: nodes[u].color for u in self.order}
        return RunResult(
            algorithm=self.config.algorithm,
            coloring=coloring,
            color_round=dict(self.color_round),
            rounds=max(self.color_round.values()),
            termination_round=r,
            colors_used=colors_used(coloring),
            avg_messages_per_node=messages / n,
            avg_bytes_per_node=total_bytes / n,
            max_message_bytes=max_bytes,
            init_bytes_per_node=init_bytes / n,
            hello_bytes_per_node=self.hello_bytes / n,
            priorities={u: tuple(p) for u, p in self.priorities.items()},
            events=self.events,
            config=_config_dict(self.config),
            topology_origin=self.topo.origin,
        )

    def _check(self, r: int, colored: list[tuple[int, int]]) -> None:
        """Global-knowledge assertions on the round's coloring decisions."""
        nodes = self.nodes
        just = {u for u, _ in colored}
        for u, color in colored:
            key = nodes[u].priority
            hops = self.hops[u]
            for w, d in hops.items():
                if w == u:
                    continue
                node = nodes[w]
                uncolored_before = node.color is None or w in just
                if uncolored_before and node.priority > key:
                    raise InvariantViolation(
                        f"round {r}: {u} colored while higher-priority {w} ({d} hops) was uncolored"
                    )
            taken = 0
            for w in hops:
                if w != u and w not in just and nodes[w].color is not None:
                    taken |= 1 << nodes[w].color
            node = nodes[u]
            if isinstance(node, NodeState):
                known = (node.bitmap1 | node.bitmap2 | node.bitmap3) & ~(1 << color)
            else:
                known = node.used_colors
            if known != taken:
                raise InvariantViolation(
                    f"round {r}: {u} knew colors {bin(known)} but {bin(taken)} are taken within 3 hops"
                )
        for u, node in nodes.items():
            if isinstance(node, NodeState):
                for w in node.implicit_node_colored_list:
                    if nodes[w].color is None:
                        raise InvariantViolation(f"round {r}: {u} believes uncolored {w} is colored")

    def _dump(self, r: int) -> dict:
        dump = {"round": r, "algorithm": self.config.algorithm, "nodes": {}}
        for u, node in self.nodes.items():
            entry = {
                "color": node.color,
                "stopped": node.stopped,
                "neighbors": sorted(node.neighbors),
                "eligible": node.is_eligible(),
            }
            if isinstance(node, NodeState):
                entry["max_prio1"] = list(node.max_prio1)
                entry["max_prio2"] = list(node.max_prio2)
                entry["max_prio3"] = node.max_prio3
                entry["implicit"] = sorted(node.implicit_node_colored_list)
            else:
                entry["blocking"] = sorted(node.blocking)
            dump["nodes"][str(u)] = entry
        return dump

