"""OSERENA node: bounded priority lists and color bitmaps instead of 2-hop tables.

Each round a node broadcasts a :class:`ColorMessage` built from its previous
state, then folds the messages of its 1-hop neighbors into a new state:

* ``max_prio1`` holds the highest priorities of its uncolored 1-hop neighbors,
* ``max_prio2`` merges the neighbors' ``max_prio1`` lists (2-hop horizon),
* ``max_prio3`` is the single maximum of the neighbors' ``max_prio2`` lists,
* ``bitmap1/2/3`` are the colors taken at 1, 2 and 3 hops.

Priorities travel packed (:func:`wsncolor.priority.pack`), so the lists are
tuples of ints sorted in decreasing order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .firstfit import smallest_free
from .priority import address_of, unpack

DEFAULT_SIZE_MP1 = 4
DEFAULT_SIZE_MP2 = 3


@dataclass(frozen=True, slots=True)
class ColorMessage:
    sender: int
    priority: int
    max_prio1: tuple[int, ...]
    max_prio2: tuple[int, ...]
    color: int | None
    bitmap1: int
    bitmap2: int

    def describe(self) -> dict:
        """Readable form with unpacked priorities and bitmap colors."""
        return {
            "sender": self.sender,
            "priority": tuple(unpack(self.priority)),
            "max_prio1": [tuple(unpack(p)) for p in self.max_prio1],
            "max_prio2": [tuple(unpack(p)) for p in self.max_prio2],
            "color": self.color,
            "bitmap1": bitmap_colors(self.bitmap1),
            "bitmap2": bitmap_colors(self.bitmap2),
        }


def bitmap_colors(bits: int) -> list[int]:
    return [c for c in range(bits.bit_length()) if bits >> c & 1]


def _shrank(old: tuple[int, ...], new: tuple[int, ...]) -> bool:
    # True when some old entry ranks above the new head (R3 candidates exist)
    return bool(old) and (not new or old[0] > new[0])


class NodeState:
    """Protocol state of one OSERENA node.

    ``last`` maps every current 1-hop neighbor to the last Color message
    heard from it. That message is both the neighbor's view for this round
    (reused verbatim while it stays silent, rule R6) and the "previous" lists
    rule R3 compares the next message against.
    """

    def __init__(
        self,
        address: int,
        priority: int,
        neighbors: Iterable[int],
        size_mp1: int = DEFAULT_SIZE_MP1,
        size_mp2: int = DEFAULT_SIZE_MP2,
        r6_threshold: int = 2,
    ):
        if size_mp1 < 1 or size_mp2 < 1:
            raise ValueError("list sizes must be >= 1")
        if r6_threshold < 2:
            raise ValueError("R6 threshold must be >= 2")
        self.address = address
        self.priority = priority
        self.neighbors = set(neighbors)
        self.size_mp1 = size_mp1
        self.size_mp2 = size_mp2
        self.r6_threshold = r6_threshold

        self.color: int | None = None
        self.stopped = False
        self.last: dict[int, ColorMessage] = {}
        self.misses: dict[int, int] = {v: 0 for v in self.neighbors}
        # packed priorities of nodes inferred colored; only ever grows
        self.implicit: set[int] = set()
        self.max_prio1: tuple[int, ...] = ()
        self.max_prio2: tuple[int, ...] = ()
        self.max_prio3: int | None = None
        self.bitmap1 = 0
        self.bitmap2 = 0
        self.bitmap3 = 0
        self.heard_colors = 0

        # per-step bookkeeping read by the engine's event log
        self.r3_inserted: list[int] = []
        self.r4_discards = 0
        self.evicted: list[int] = []
        # set when the neighbors' lists (resp. bitmaps) changed since last computed
        self.changed = True
        self.bitmaps_stale = True
        self._message: ColorMessage | None = None

    @property
    def implicit_node_colored_list(self) -> set[int]:
        return {address_of(p) for p in self.implicit}

    @property
    def implicit_node_colored_size(self) -> int:
        return len(self.implicit)

    # -- rule R6 -----------------------------------------------------------

    def handle_missing_neighbor(self, v: int) -> bool:
        """Count one silent round for ``v``; evict it at the threshold.

        Below the threshold the last message of ``v`` stays in ``last`` and
        is reused as-is. Returns True when ``v`` was evicted.
        """
        misses = self.misses.get(v, 0) + 1
        if misses < self.r6_threshold:
            self.misses[v] = misses
            return False
        self.neighbors.discard(v)
        self.last.pop(v, None)
        self.misses.pop(v, None)
        self.evicted.append(v)
        return True

    # -- rule R3 -----------------------------------------------------------

    def update_implicit_colored(self, v: int, msg: ColorMessage) -> list[int]:
        """Infer recently colored nodes from how ``v``'s lists shrank."""
        inserted = []
        implicit = self.implicit
        if msg.color is not None and msg.priority not in implicit:
            implicit.add(msg.priority)
            inserted.append(msg.priority)
        prev = self.last.get(v)
        if prev is not None:
            for old, new in ((prev.max_prio1, msg.max_prio1), (prev.max_prio2, msg.max_prio2)):
                if not _shrank(old, new):
                    continue
                head = new[0] if new else -1
                for p in old:
                    if p <= head:
                        break
                    if p != self.priority and p not in implicit:
                        implicit.add(p)
                        inserted.append(p)
        self.r3_inserted.extend(inserted)
        return inserted

    def receive(
        self,
        inbox: Mapping[int, ColorMessage],
        heard: Iterable[ColorMessage] = (),
        missing: Iterable[int] | None = None,
    ):
        """Fold one round of received messages into the neighbor table.

        By default ``inbox`` holds everything heard this round. When
        ``missing`` is given, ``inbox`` only holds messages that changed and
        every neighbor outside ``missing`` resent its previous message.
        """
        self.r3_inserted = []
        self.r4_discards = 0
        self.evicted = []
        last = self.last
        misses = self.misses
        if missing is None:
            silent = self.neighbors - inbox.keys() if len(inbox) < len(self.neighbors) else ()
        else:
            silent = self.neighbors.intersection(missing)
            for v in [v for v, k in misses.items() if k and v not in silent]:
                misses[v] = 0
        for v in sorted(silent):
            if self.handle_missing_neighbor(v):
                self.changed = self.bitmaps_stale = True
        neighbors = self.neighbors
        implicit = self.implicit
        for v, msg in inbox.items():
            prev = last.get(v)
            if msg is prev:
                # senders resend the same object while their state is unchanged
                misses[v] = 0
                continue
            if v not in neighbors:
                # first contact, or a neighbor heard again after eviction
                neighbors.add(v)
                last.pop(v, None)
                prev = None
            if prev is None:
                self.update_implicit_colored(v, msg)
                self.changed = True
            else:
                m1, m2 = msg.max_prio1, msg.max_prio2
                if prev.color != msg.color or prev.max_prio1 != m1 or prev.max_prio2 != m2:
                    if (
                        (msg.color is not None and msg.priority not in implicit)
                        or _shrank(prev.max_prio1, m1)
                        or _shrank(prev.max_prio2, m2)
                    ):
                        self.update_implicit_colored(v, msg)
                    self.changed = True
            last[v] = msg
            misses[v] = 0
        if inbox:
            self.bitmaps_stale = True
        for msg in heard:
            if msg.color is not None:
                self.heard_colors |= 1 << msg.color

    # -- rule R4 and list computation -------------------------------------

    def compute_max_prios(self) -> tuple[tuple[int, ...], tuple[int, ...], int | None]:
        implicit = self.implicit
        size1, size2 = self.size_mp1, self.size_mp2
        messages = self.last.values()
        discards = 0

        mp1 = sorted(
            (m.priority for m in messages if m.color is None and m.priority not in implicit),
            reverse=True,
        )[:size1]

        merged = set()
        for m in messages:
            lst = m.max_prio1
            if implicit.isdisjoint(lst):
                merged.update(lst)
                continue
            complete = len(lst) < size1
            for i, p in enumerate(lst):
                # a colored entry may go only if the list still bounds what it truncated
                if p in implicit and (i == 0 or complete):
                    discards += 1
                else:
                    merged.add(p)
        mp2 = sorted(merged, reverse=True)[:size2]

        mp3 = None
        last_slot = size2 - 1
        for m in messages:
            lst = m.max_prio2
            if not lst:
                continue
            head = lst[0]
            if head not in implicit or last_slot == 0:
                if mp3 is None or head > mp3:
                    mp3 = head
                continue
            for i, p in enumerate(lst):
                if i < last_slot and p in implicit:
                    discards += 1
                    continue
                if mp3 is None or p > mp3:
                    mp3 = p
                break

        # keep the old tuples when equal so messages can be compared by identity
        mp1, mp2 = tuple(mp1), tuple(mp2)
        if mp1 != self.max_prio1:
            self.max_prio1 = mp1
        if mp2 != self.max_prio2:
            self.max_prio2 = mp2
        self.max_prio3 = mp3
        self.r4_discards += discards
        return self.max_prio1, self.max_prio2, self.max_prio3

    def compute_bitmaps(self) -> tuple[int, int, int]:
        b1 = b2 = b3 = 0
        for m in self.last.values():
            if m.color is not None:
                b1 |= 1 << m.color
            b2 |= m.bitmap1
            b3 |= m.bitmap2
        if self.color is not None:
            b1 |= 1 << self.color
        self.bitmap1, self.bitmap2, self.bitmap3 = b1, b2, b3
        return b1, b2, b3

    # -- rules R'1, R'2, R5 ------------------------------------------------

    def is_eligible(self) -> bool:
        """Own priority is the maximum over itself and all three lists.

        The node's own priority may echo back through ``max_prio2`` and
        ``max_prio3``; an echo counts as equal, anything larger blocks.
        """
        top = self.priority
        if self.max_prio1 and self.max_prio1[0] > top:
            return False
        if self.max_prio2 and self.max_prio2[0] > top:
            return False
        return self.max_prio3 is None or self.max_prio3 <= top

    def try_color(self) -> int | None:
        if self.color is not None or not self.is_eligible():
            return None
        used = self.bitmap1 | self.bitmap2 | self.bitmap3 | self.heard_colors
        self.color = smallest_free(used)
        self.bitmap1 |= 1 << self.color
        return self.color

    def should_stop(self) -> bool:
        if self.color is None or self.max_prio1:
            return False
        return all(not m.max_prio1 and not m.max_prio2 for m in self.last.values())

    def build_message(self) -> ColorMessage:
        msg = self._message
        if (
            msg is not None
            and msg.color == self.color
            and msg.max_prio1 == self.max_prio1
            and msg.max_prio2 == self.max_prio2
            and msg.bitmap1 == self.bitmap1
            and msg.bitmap2 == self.bitmap2
        ):
            return msg
        msg = ColorMessage(
            self.address,
            self.priority,
            self.max_prio1,
            self.max_prio2,
            self.color,
            self.bitmap1,
            self.bitmap2,
        )
        self._message = msg
        return msg

    def step(
        self,
        inbox: Mapping[int, ColorMessage],
        heard: Iterable[ColorMessage] = (),
        allow_color: bool = True,
        missing: Iterable[int] | None = None,
    ) -> int | None:
        """Run one round of processing; returns the color taken this round, if any."""
        self.receive(inbox, heard, missing)
        if self.bitmaps_stale:
            self.compute_bitmaps()
            self.bitmaps_stale = False
        if not self.changed and self.color is not None:
            # lists and the stop test are as last round
            return None
        if self.changed:
            self.compute_max_prios()
            self.changed = False
        color = self.try_color() if allow_color else None
        if allow_color and self.should_stop():
            self.stopped = True
        return color
