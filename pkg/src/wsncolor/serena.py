"""SERENA: the unoptimized reference, exchanging full up-to-2-hop tables.

A node's Color message lists (address, priority, color) for itself and every
node it knows within 2 hops. Receivers push each entry one hop further, so
after a few rounds every node holds its whole 3-hop neighborhood.

Knowledge only ever grows (an entry appears, its hop count shrinks, its color
gets set), so a message is represented as a prefix of the sender's
append-only fact log: applying the facts not yet seen from a sender is the
same as merging its full table snapshot, at a fraction of the cost.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .firstfit import smallest_free
from .priority import unpack

# (address, packed priority, hop distance from the log owner, color)
Fact = tuple[int, int, int, "int | None"]


@dataclass(frozen=True, slots=True)
class SerenaMessage:
    sender: int
    priority: int
    color: int | None
    log: list
    length: int
    # table entries carried (sender plus nodes within 2 hops)
    n_entries: int
    all_colored: bool

    @property
    def entries(self) -> list[tuple[int, tuple[int, int], int | None]]:
        """Materialized (address, priority, color) rows, sender first."""
        table: dict[int, list] = {}
        for w, key, dist, color in self.log[: self.length]:
            row = table.setdefault(w, [key, dist, color])
            row[1] = min(row[1], dist)
            if color is not None:
                row[2] = color
        rows = sorted(table.items(), key=lambda item: (item[1][1], -item[1][0]))
        return [(w, tuple(unpack(key)), color) for w, (key, _, color) in rows]


class SerenaNode:
    def __init__(self, address: int, priority: int, neighbors: Iterable[int], r6_threshold: int = 2):
        if r6_threshold < 2:
            raise ValueError("R6 threshold must be >= 2")
        self.address = address
        self.priority = priority
        self.neighbors = set(neighbors)
        self.r6_threshold = r6_threshold
        self.color: int | None = None
        self.stopped = False

        # address -> [packed priority, hop distance, color]
        self.table: dict[int, list] = {}
        self.log: list[Fact] = [(address, priority, 0, None)]
        self.forwarded = 1
        self.uncolored_forwarded = 1
        self.used_colors = 0
        self.heard_colors = 0
        # higher-priority nodes within 3 hops not yet known colored
        self.blocking: set[int] = set()

        self.seen: dict[int, int] = {}
        self.last: dict[int, SerenaMessage] = {}
        self.misses: dict[int, int] = {v: 0 for v in self.neighbors}
        self.evicted: list[int] = []
        self._message: SerenaMessage | None = None

    def _learn(self, w: int, key: int, dist: int, color) -> None:
        row = self.table.get(w)
        if row is None:
            self.table[w] = [key, dist, color]
            if color is None:
                if key > self.priority:
                    self.blocking.add(w)
            else:
                self.used_colors |= 1 << color
            if dist <= 2:
                self.forwarded += 1
                if color is None:
                    self.uncolored_forwarded += 1
                self.log.append((w, key, dist, color))
            return
        changed = False
        if dist < row[1]:
            if row[1] > 2 >= dist:
                self.forwarded += 1
                if row[2] is None:
                    self.uncolored_forwarded += 1
            row[1] = dist
            changed = True
        if color is not None and row[2] is None:
            row[2] = color
            self.used_colors |= 1 << color
            self.blocking.discard(w)
            if row[1] <= 2:
                self.uncolored_forwarded -= 1
            changed = True
        if changed and row[1] <= 2:
            self.log.append((w, key, row[1], row[2]))

    def handle_missing_neighbor(self, v: int) -> bool:
        misses = self.misses.get(v, 0) + 1
        if misses < self.r6_threshold:
            self.misses[v] = misses
            return False
        self.neighbors.discard(v)
        self.last.pop(v, None)
        self.misses.pop(v, None)
        self.evicted.append(v)
        return True

    def receive(
        self,
        inbox: Mapping[int, SerenaMessage],
        heard: Iterable[SerenaMessage] = (),
        missing: Iterable[int] | None = None,
    ):
        """Apply a round of messages; ``missing`` switches to changed-only delivery."""
        self.evicted = []
        misses = self.misses
        if missing is None:
            silent = self.neighbors - inbox.keys() if len(inbox) < len(self.neighbors) else ()
        else:
            silent = self.neighbors.intersection(missing)
            for v in [v for v, k in misses.items() if k and v not in silent]:
                misses[v] = 0
        for v in sorted(silent):
            self.handle_missing_neighbor(v)
        me = self.address
        for v, msg in inbox.items():
            self.neighbors.add(v)
            self.last[v] = msg
            misses[v] = 0
            start = self.seen.get(v, 0)
            if start == msg.length:
                continue
            for w, key, dist, color in msg.log[start : msg.length]:
                if w != me:
                    self._learn(w, key, dist + 1, color)
            self.seen[v] = msg.length
        for msg in heard:
            if msg.color is not None:
                self.heard_colors |= 1 << msg.color

    def is_eligible(self) -> bool:
        return not self.blocking

    def try_color(self) -> int | None:
        if self.color is not None or self.blocking:
            return None
        self.color = smallest_free(self.used_colors | self.heard_colors)
        self.uncolored_forwarded -= 1
        self.log.append((self.address, self.priority, 0, self.color))
        return self.color

    def should_stop(self) -> bool:
        """Colored, and every neighbor reported its whole 2-hop table colored."""
        if self.color is None:
            return False
        return all(m.all_colored for m in self.last.values())

    def build_message(self) -> SerenaMessage:
        msg = self._message
        if msg is not None and msg.length == len(self.log):
            # the log only grows, so an unchanged length means unchanged content
            return msg
        msg = SerenaMessage(
            self.address,
            self.priority,
            self.color,
            self.log,
            len(self.log),
            self.forwarded,
            self.uncolored_forwarded == 0,
        )
        self._message = msg
        return msg

    def step(
        self,
        inbox: Mapping[int, SerenaMessage],
        heard: Iterable[SerenaMessage] = (),
        allow_color: bool = True,
        missing: Iterable[int] | None = None,
    ) -> int | None:
        self.receive(inbox, heard, missing)
        color = self.try_color() if allow_color else None
        if allow_color and self.should_stop():
            self.stopped = True
        return color


def serena_step(state: SerenaNode, inbox: Mapping[int, SerenaMessage]):
    """Functional wrapper: process ``inbox`` and return (state, outgoing message or None)."""
    state.step(inbox)
    return state, (None if state.stopped else state.build_message())
