"""Bad-scenario probability bound and empirical detection of OSERENA delays.

Under list sizes (4, 3) OSERENA colors every node in the same round as SERENA
unless three nodes, each 2 hops from the delayed node and pairwise 4 hops
apart, color simultaneously just before it. The bound below caps the
probability of that configuration; :func:`detect_delays` checks runs against
it one delay at a time.
"""

from __future__ import annotations

import math
from itertools import combinations
from typing import Mapping, NamedTuple

from .priority import Priority, by_priority
from .topology import Topology


def p1_bound() -> float:
    """Geometric factor: chance a third blocker fits 2 hops from u and 4 hops from the other two."""
    return 0.25 - math.sqrt(4 - 2 * math.sqrt(3)) / (2 * math.pi)


def p2_bound(m: float) -> float:
    """Chance that the three blockers all outrank their surroundings, given mean degree ``m``."""
    if m < 1:
        raise ValueError(f"mean neighbor count must be >= 1, got {m}")
    return 27 / 64 * (1 - 3 / (4 * m + 1))


def p3_bound() -> float:
    return 1.0


def bad_scenario_bound(m: float) -> float:
    """Upper bound on the probability that a node is delayed, for mean degree ``m`` >= 1."""
    return p2_bound(m) * p1_bound() * p3_bound()


def geometric_check_size5(radius: float = 1.0) -> float:
    """Distance ratio behind the (5, 4) setting: two points at sqrt(8) R, closer than 3 R."""
    d = math.sqrt(8 * radius**2) / radius
    assert d < 3, d
    return d


class BadScenarioEvent(NamedTuple):
    node: int
    blockers: frozenset[int]
    round: int


class Delay(NamedTuple):
    node: int
    serena_round: int
    oserena_round: int


class DelayReport(NamedTuple):
    delays: list[Delay]
    # delayed node -> triple found directly around it
    events: dict[int, BadScenarioEvent]
    # delayed node -> earlier delayed node it waited for
    cascades: dict[int, int]
    unexplained: list[int]

    @property
    def all_explained(self) -> bool:
        return not self.unexplained


class MismatchedRuns(ValueError):
    pass


def serena_schedule(topo: Topology, priorities: Mapping[int, Priority]) -> dict[int, int]:
    """Closed-form SERENA coloring rounds on a loss-free network.

    A color taken in round t reaches a node d hops away in round t + d, so a
    node colors once its last higher-priority node within 3 hops has been
    heard of: round(u) = max(1, max over such w of round(w) + d(u, w)).
    """
    rounds: dict[int, int] = {}
    for u in by_priority(priorities):
        r = 1
        for w, d in topo.hop_distances(u, limit=3).items():
            if w != u and w in rounds:
                r = max(r, rounds[w] + d)
        rounds[u] = r
    return rounds


def _check_pair(serena_result, oserena_result) -> None:
    if serena_result.algorithm != "serena" or oserena_result.algorithm != "oserena":
        raise MismatchedRuns("expected a (serena, oserena) pair of results")
    if serena_result.priorities != oserena_result.priorities:
        raise MismatchedRuns("runs use different priorities")
    if serena_result.topology_origin != oserena_result.topology_origin:
        raise MismatchedRuns("runs come from different topologies")
    for key in ("seed", "loss_rate", "heard_links"):
        if serena_result.config.get(key) != oserena_result.config.get(key):
            raise MismatchedRuns(f"runs differ in {key}")


def detect_delays(topo: Topology, serena_result, oserena_result, strict: bool = False) -> DelayReport:
    """Match every node OSERENA colors later than SERENA to a bad scenario.

    A direct match is a triple colored in the same OSERENA round, between
    three rounds before u's SERENA round and u's OSERENA round, each blocker
    2 hops from u and the blockers pairwise 4 hops apart (more than 3 hops
    when ``strict``). A delay with no triple of its own is a cascade when a
    delayed higher-priority node within 3 hops colored late enough to hold
    it back; it is then explained if that node is.
    """
    _check_pair(serena_result, oserena_result)
    if set(serena_result.color_round) != set(topo.addresses):
        raise MismatchedRuns("results do not cover this topology")

    s_round = serena_result.color_round
    o_round = oserena_result.color_round
    keys = {u: Priority(*p).key for u, p in oserena_result.priorities.items()}
    delays = sorted(
        (Delay(u, s_round[u], o_round[u]) for u in topo.addresses if o_round[u] > s_round[u]),
        key=lambda d: (d.oserena_round, d.node),
    )

    by_round: dict[int, list[int]] = {}
    for u, r in o_round.items():
        by_round.setdefault(r, []).append(u)
    far_cache: dict[int, dict[int, int]] = {}

    def far_apart(a: int, b: int) -> bool:
        if a not in far_cache:
            far_cache[a] = topo.hop_distances(a, limit=4)
        d = far_cache[a].get(b)
        return d == 4 or (strict and d is None)

    events: dict[int, BadScenarioEvent] = {}
    cascades: dict[int, int] = {}
    unexplained: list[int] = []
    delayed = {d.node: d for d in delays}
    for d in delays:
        u = d.node
        hops = topo.hop_distances(u, limit=3)
        ring2 = {w for w, h in hops.items() if h == 2}
        found = None
        for t in range(d.serena_round - 3, d.oserena_round):
            cands = sorted(w for w in by_round.get(t, ()) if w in ring2)
            for triple in combinations(cands, 3):
                if all(far_apart(a, b) for a, b in combinations(triple, 2)):
                    found = BadScenarioEvent(u, frozenset(triple), t)
                    break
            if found:
                break
        if found:
            events[u] = found
            continue
        cause = None
        for w, h in hops.items():
            if w in delayed and keys[w] > keys[u] and o_round[w] + h >= d.oserena_round - 1:
                if w in events or w in cascades:
                    cause = w
                    break
        if cause is not None:
            cascades[u] = cause
        else:
            unexplained.append(u)
    return DelayReport(delays, events, cascades, unexplained)


__all__ = [
    "BadScenarioEvent",
    "Delay",
    "DelayReport",
    "MismatchedRuns",
    "bad_scenario_bound",
    "detect_delays",
    "geometric_check_size5",
    "p1_bound",
    "p2_bound",
    "p3_bound",
    "serena_schedule",
]
