"""Node priorities and the total order shared by every coloring algorithm.

A priority is the pair ``(prio, address)``. Node ``a`` ranks above node ``b``
when ``a.prio > b.prio``, or when the prios tie and ``a.address < b.address``.

Protocol code carries priorities packed into a single integer (see
:func:`pack`) whose natural integer order is that total order, so list
maxima and merges are plain integer operations.
"""

from __future__ import annotations

from typing import Mapping, NamedTuple

from .topology import Topology

ADDRESS_SPACE = 1 << 32


class Priority(NamedTuple):
    prio: int
    address: int

    @property
    def key(self) -> int:
        return pack(self.prio, self.address)

    def outranks(self, other: "Priority") -> bool:
        return higher_priority(self, other)


def pack(prio: int, address: int) -> int:
    if not 0 <= address < ADDRESS_SPACE:
        raise ValueError(f"address {address} outside [0, 2**32)")
    if prio < 0:
        raise ValueError(f"prio must be non-negative, got {prio}")
    return prio * ADDRESS_SPACE + (ADDRESS_SPACE - 1 - address)


def unpack(key: int) -> Priority:
    prio, rest = divmod(key, ADDRESS_SPACE)
    return Priority(prio, ADDRESS_SPACE - 1 - rest)


def address_of(key: int) -> int:
    return ADDRESS_SPACE - 1 - key % ADDRESS_SPACE


def higher_priority(a: Priority, b: Priority) -> bool:
    if a.address == b.address:
        raise ValueError(f"node {a.address} compared with itself")
    if a.prio != b.prio:
        return a.prio > b.prio
    return a.address < b.address


def compute_prio(topo: Topology, u: int) -> int:
    """Degree of ``u`` plus the degrees of all its 1-hop neighbors."""
    neighbors = topo.neighbors(u)
    return len(neighbors) + sum(topo.degree(v) for v in neighbors)


def priority_map(topo: Topology, prios: Mapping[int, int] | None = None) -> dict[int, Priority]:
    """Priorities for every node; ``prios`` overrides the default prio values."""
    if prios is None:
        return {u: Priority(compute_prio(topo, u), u) for u in topo.addresses}
    missing = set(topo.addresses) - set(prios)
    if missing:
        raise ValueError(f"prio map misses nodes {sorted(missing)}")
    return {u: Priority(int(prios[u]), u) for u in topo.addresses}


def by_priority(priorities: Mapping[int, Priority]) -> list[int]:
    """Addresses from highest to lowest priority."""
    return sorted(priorities, key=lambda u: priorities[u].key, reverse=True)
