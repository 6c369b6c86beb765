"""Centralized First Fit 3-hop coloring and coloring verification."""

from __future__ import annotations

from typing import Mapping, NamedTuple

from .priority import Priority, by_priority
from .topology import Topology, khop_neighbors

Coloring = dict[int, int]


class IncompleteColoringError(ValueError):
    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__(f"coloring misses nodes {self.missing}")


class Verification(NamedTuple):
    valid: bool
    violations: list[tuple[int, int]]


def smallest_free(used: int) -> int:
    """Lowest color whose bit is clear in the bitset ``used``."""
    return ((~used) & (used + 1)).bit_length() - 1


def firstfit_3hop(topo: Topology, priorities: Mapping[int, Priority], hops: int = 3) -> Coloring:
    """Color nodes in decreasing priority, each with the smallest color unused within ``hops``."""
    missing = set(topo.addresses) - set(priorities)
    if missing:
        raise ValueError(f"priorities missing for {sorted(missing)}")
    coloring: Coloring = {}
    for u in by_priority(priorities):
        used = 0
        for v in khop_neighbors(topo, u, hops):
            c = coloring.get(v)
            if c is not None:
                used |= 1 << c
        coloring[u] = smallest_free(used)
    return coloring


def verify_coloring(topo: Topology, coloring: Mapping[int, int], h: int = 3) -> Verification:
    """Check that no two nodes within ``h`` hops share a color.

    Raises :class:`IncompleteColoringError` when some node has no color, so an
    unfinished run is never mistaken for a conflicting one.
    """
    missing = [u for u in topo.addresses if coloring.get(u) is None]
    if missing:
        raise IncompleteColoringError(missing)
    violations = []
    for u in topo.addresses:
        for v in khop_neighbors(topo, u, h):
            if u < v and coloring[u] == coloring[v]:
                violations.append((u, v))
    violations.sort()
    return Verification(not violations, violations)


def colors_used(coloring: Mapping[int, int]) -> int:
    return len(set(coloring.values()))
