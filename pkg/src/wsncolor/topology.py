"""Unit disk graph topologies: generation, hop queries and a small text format."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np


class TopologyError(ValueError):
    """Raised for malformed topologies or topology files."""


class Node(NamedTuple):
    address: int
    x: float
    y: float


@dataclass(frozen=True)
class Topology:
    """Immutable set of nodes in the plane with unit disk adjacency.

    Two nodes are linked iff their euclidean distance is strictly lower than
    ``radius``. Edges are always derived from coordinates.
    """

    nodes: tuple[Node, ...]
    radius: float = 1.0
    # provenance of generated topologies: (seed, attempt); not part of equality
    origin: tuple[int, int] | None = field(default=None, compare=False)
    adjacency: dict[int, frozenset[int]] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self):
        nodes = tuple(Node(int(a), float(x), float(y)) for a, x, y in self.nodes)
        object.__setattr__(self, "nodes", nodes)
        if not self.radius > 0:
            raise TopologyError(f"radius must be positive, got {self.radius}")
        seen = set()
        for node in nodes:
            if node.address in seen:
                raise TopologyError(f"duplicate address {node.address}")
            seen.add(node.address)
        object.__setattr__(self, "adjacency", _unit_disk_adjacency(nodes, self.radius))

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def addresses(self) -> list[int]:
        return [node.address for node in self.nodes]

    def neighbors(self, u: int) -> frozenset[int]:
        try:
            return self.adjacency[u]
        except KeyError:
            raise KeyError(f"unknown address {u}") from None

    def degree(self, u: int) -> int:
        return len(self.neighbors(u))

    def edges(self) -> list[tuple[int, int]]:
        return sorted((u, v) for u, vs in self.adjacency.items() for v in vs if u < v)

    def mean_degree(self) -> float:
        if not self.nodes:
            return 0.0
        return sum(len(vs) for vs in self.adjacency.values()) / len(self.nodes)

    def hop_distances(self, u: int, limit: int | None = None) -> dict[int, int]:
        """BFS hop counts from ``u`` (``u`` itself at 0), optionally truncated."""
        if u not in self.adjacency:
            raise KeyError(f"unknown address {u}")
        dist = {u: 0}
        queue = deque([u])
        while queue:
            w = queue.popleft()
            d = dist[w]
            if limit is not None and d >= limit:
                continue
            for x in self.adjacency[w]:
                if x not in dist:
                    dist[x] = d + 1
                    queue.append(x)
        return dist


def _unit_disk_adjacency(nodes: tuple[Node, ...], radius: float) -> dict[int, frozenset[int]]:
    addresses = [n.address for n in nodes]
    if len(nodes) < 2:
        return {a: frozenset() for a in addresses}
    xy = np.array([(n.x, n.y) for n in nodes])
    diff = xy[:, None, :] - xy[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    linked = d2 < radius * radius
    np.fill_diagonal(linked, False)
    return {
        a: frozenset(addresses[j] for j in np.flatnonzero(linked[i]))
        for i, a in enumerate(addresses)
    }


def from_edges(edges: Iterable[tuple[int, int]], addresses: Iterable[int] = ()) -> "GraphTopology":
    """Build an abstract topology (no geometry) from an explicit edge list."""
    return GraphTopology(edges, addresses)


class GraphTopology(Topology):
    """Topology given by explicit edges instead of coordinates.

    Hand-built test graphs (paths, cliques, witness gadgets) rarely have a
    convenient embedding; this keeps the same query surface.
    """

    def __init__(self, edges: Iterable[tuple[int, int]], addresses: Iterable[int] = ()):
        adj: dict[int, set[int]] = {int(a): set() for a in addresses}
        for u, v in edges:
            if u == v:
                raise TopologyError(f"self loop on {u}")
            adj.setdefault(int(u), set()).add(int(v))
            adj.setdefault(int(v), set()).add(int(u))
        order = sorted(adj)
        object.__setattr__(self, "nodes", tuple(Node(a, math.nan, math.nan) for a in order))
        object.__setattr__(self, "radius", 1.0)
        object.__setattr__(self, "origin", None)
        object.__setattr__(self, "adjacency", {a: frozenset(adj[a]) for a in order})

    def __eq__(self, other):
        if not isinstance(other, GraphTopology):
            return NotImplemented
        return self.adjacency == other.adjacency

    __hash__ = None


def khop_neighbors(topo: Topology, u: int, k: int) -> set[int]:
    """All nodes other than ``u`` within ``k`` hops of ``u``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    dist = topo.hop_distances(u, limit=k)
    del dist[u]
    return set(dist)


def is_connected(topo: Topology) -> bool:
    if len(topo) <= 1:
        return True
    start = topo.nodes[0].address
    return len(topo.hop_distances(start)) == len(topo)


def deployment_side(n: int, density: float, radius: float = 1.0) -> float:
    """Side of the square in which ``n`` uniform nodes average ``density`` nodes per disk."""
    return math.sqrt(n * math.pi * radius * radius / density)


def generate_udg(n: int, density: float, seed: int, max_attempts: int = 1000) -> Topology:
    """Place ``n`` nodes uniformly in a square until the unit disk graph is connected.

    Addresses are ``0..n-1``. Attempt ``i`` draws from the stream seeded by
    ``(seed, i)``, so the result only depends on the arguments.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if density < 0:
        raise ValueError("density must be >= 0")
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    if n == 1:
        return Topology((Node(0, 0.0, 0.0),), 1.0, origin=(seed, 0))
    if density == 0:
        raise TopologyError(f"density 0 cannot yield a connected topology of {n} nodes")
    side = deployment_side(n, density)
    for attempt in range(max_attempts):
        rng = np.random.default_rng([seed, attempt])
        xy = rng.uniform(0.0, side, size=(n, 2))
        topo = Topology(
            tuple(Node(i, x, y) for i, (x, y) in enumerate(xy.tolist())),
            1.0,
            origin=(seed, attempt),
        )
        if is_connected(topo):
            return topo
    raise TopologyError(
        f"no connected topology for n={n}, density={density}, seed={seed} "
        f"after {max_attempts} attempts"
    )


def save_topology(topo: Topology, destination) -> None:
    if isinstance(topo, GraphTopology):
        raise TopologyError("only geometric topologies can be saved")
    lines = [f"udg {len(topo)} {topo.radius!r}"]
    lines += [f"{node.address} {node.x!r} {node.y!r}" for node in topo.nodes]
    Path(destination).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_topology(source) -> Topology:
    text = Path(source).read_text(encoding="utf-8")
    return parse_topology(text, name=str(source))


def parse_topology(text: str, name: str = "<string>") -> Topology:
    rows = [(i, line.split()) for i, line in enumerate(text.splitlines(), 1)]
    rows = [(i, f) for i, f in rows if f and not f[0].startswith("#")]
    if not rows:
        raise TopologyError(f"{name}: empty topology file")
    lineno, header = rows[0]
    if header[0] != "udg":
        raise TopologyError(f"{name}:{lineno}: expected header 'udg <n> <R>'")
    if len(header) != 3:
        raise TopologyError(f"{name}:{lineno}: header needs node count and radius R")
    try:
        count = int(header[1])
    except ValueError:
        raise TopologyError(f"{name}:{lineno}: bad node count {header[1]!r}") from None
    try:
        radius = float(header[2])
    except ValueError:
        raise TopologyError(f"{name}:{lineno}: bad radius {header[2]!r}") from None
    if not radius > 0:
        raise TopologyError(f"{name}:{lineno}: radius must be positive")
    body = rows[1:]
    if len(body) != count:
        raise TopologyError(f"{name}: header announces {count} nodes, found {len(body)}")
    nodes = []
    seen: dict[int, int] = {}
    for lineno, fields in body:
        if len(fields) != 3:
            raise TopologyError(f"{name}:{lineno}: expected '<address> <x> <y>'")
        try:
            address = int(fields[0])
        except ValueError:
            raise TopologyError(f"{name}:{lineno}: bad address {fields[0]!r}") from None
        try:
            x, y = float(fields[1]), float(fields[2])
        except ValueError:
            raise TopologyError(f"{name}:{lineno}: bad coordinate") from None
        if address in seen:
            raise TopologyError(
                f"{name}:{lineno}: duplicate address {address} (first on line {seen[address]})"
            )
        seen[address] = lineno
        nodes.append(Node(address, x, y))
    return Topology(tuple(nodes), radius)
