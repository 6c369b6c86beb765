import pytest

from wsncolor.oserena import ColorMessage, NodeState, bitmap_colors
from wsncolor.priority import pack


def key(prio, address):
    return pack(prio, address)


def msg(sender, prio, mp1=(), mp2=(), color=None, b1=0, b2=0):
    return ColorMessage(sender, key(prio, sender), tuple(mp1), tuple(mp2), color, b1, b2)


def node(address=0, prio=1, neighbors=(), **kw):
    return NodeState(address, key(prio, address), neighbors, **kw)


# -- max_prio lists -----------------------------------------------------------


def test_empty_lists_when_everything_is_colored():
    u = node(neighbors=[1, 2])
    u.receive({1: msg(1, 5, color=0), 2: msg(2, 6, color=1)})
    assert u.compute_max_prios() == ((), (), None)


def test_max_prio1_keeps_the_four_highest():
    u = node(neighbors=range(1, 6))
    u.receive({v: msg(v, 4 + v) for v in range(1, 6)})
    mp1, _, _ = u.compute_max_prios()
    assert mp1 == tuple(key(p, p - 4) for p in (9, 8, 7, 6))


def test_r4_head_discarded_from_merge():
    p = [key(9, 10), key(8, 11), key(7, 12), key(6, 13)]
    u = node(neighbors=[1])
    u.implicit.add(p[0])
    u.receive({1: msg(1, 1, mp1=p)})
    _, mp2, _ = u.compute_max_prios()
    assert mp2 == (p[1], p[2], p[3])
    assert u.r4_discards == 1


def test_r4_second_entry_kept_when_list_is_full():
    p = [key(9, 10), key(8, 11), key(7, 12), key(6, 13)]
    u = node(neighbors=[1])
    u.implicit.add(p[1])
    u.receive({1: msg(1, 1, mp1=p)})
    _, mp2, _ = u.compute_max_prios()
    assert mp2 == (p[0], p[1], p[2])


@pytest.mark.parametrize("position", [1, 2])
def test_r4_inner_entry_discarded_when_tail_is_empty(position):
    p = [key(9, 10), key(8, 11), key(7, 12)]
    u = node(neighbors=[1])
    u.implicit.add(p[position])
    u.receive({1: msg(1, 1, mp1=p)})
    _, mp2, _ = u.compute_max_prios()
    assert p[position] not in mp2


def test_r4_max_prio3_discards_head_and_second_only():
    p = [key(9, 10), key(8, 11), key(7, 12)]
    u = node(neighbors=[1])
    u.implicit.update(p)
    u.receive({1: msg(1, 1, mp2=p)})
    assert u.compute_max_prios()[2] == p[2]


def test_max_prio3_is_the_maximum_head():
    u = node(neighbors=[1, 2])
    u.receive({1: msg(1, 1, mp2=[key(5, 20)]), 2: msg(2, 1, mp2=[key(7, 21), key(3, 22)])})
    assert u.compute_max_prios()[2] == key(7, 21)


# -- rule R3 ------------------------------------------------------------------


def test_r3_vanished_head_inserted():
    u = node(neighbors=[1])
    u.receive({1: msg(1, 1, mp1=[key(9, 5)])})
    u.receive({1: msg(1, 1, mp1=[])})
    assert u.implicit_node_colored_list == {5}


def test_r3_only_entries_above_new_head():
    u = node(neighbors=[1])
    u.receive({1: msg(1, 1, mp1=[key(9, 5), key(7, 6)])})
    u.receive({1: msg(1, 1, mp1=[key(7, 6)])})
    assert u.implicit_node_colored_list == {5}
    assert u.r3_inserted == [key(9, 5)]


def test_r3_no_insertion_on_growth():
    u = node(neighbors=[1])
    u.receive({1: msg(1, 1)})
    u.receive({1: msg(1, 1, mp1=[key(5, 7)])})
    assert u.implicit_node_colored_size == 0


def test_r3_colored_sender_inserted():
    u = node(neighbors=[1])
    u.receive({1: msg(1, 4, color=2)})
    assert u.implicit_node_colored_list == {1}


def test_r3_applies_to_max_prio2():
    u = node(neighbors=[1])
    u.receive({1: msg(1, 1, mp2=[key(9, 5), key(8, 6)])})
    u.receive({1: msg(1, 1, mp2=[key(4, 7)])})
    assert u.implicit_node_colored_list == {5, 6}


# -- rules R'1 and R'2 --------------------------------------------------------


def test_star_center_with_highest_priority_colors_zero():
    u = node(prio=9, neighbors=[1, 2, 3])
    u.step({v: msg(v, 3) for v in (1, 2, 3)}, allow_color=False)
    assert u.step({v: msg(v, 3, mp1=[key(9, 0)]) for v in (1, 2, 3)}) == 0


def test_higher_neighbor_blocks():
    u = node(prio=3, neighbors=[1])
    u.receive({1: msg(1, 5)})
    u.compute_max_prios()
    assert not u.is_eligible()
    assert u.try_color() is None


def test_own_echo_counts_as_equal():
    u = node(prio=5, neighbors=[1])
    u.receive({1: msg(1, 2, mp1=[key(5, 0)], mp2=[key(5, 0)])})
    u.compute_max_prios()
    assert u.max_prio2 == (key(5, 0),)
    assert u.is_eligible()


def test_smallest_gap_in_bitmaps():
    u = node(prio=9, neighbors=[1])
    u.receive({1: msg(1, 1, color=0, b1=0b110, b2=0b10000)})
    u.compute_max_prios()
    u.compute_bitmaps()
    # colors 0 at 1 hop, 1-2 at 2 hops, 4 at 3 hops
    assert u.try_color() == 3


def test_heard_only_colors_are_avoided():
    u = node(prio=9, neighbors=[])
    u.step({}, heard=[msg(7, 1, color=0)])
    assert u.color == 1


# -- bitmaps and messages ------------------------------------------------------


def test_first_message_is_bare():
    m = node(prio=4, neighbors=[1]).build_message()
    assert (m.max_prio1, m.max_prio2, m.color, m.bitmap1, m.bitmap2) == ((), (), None, 0, 0)


def test_bitmaps():
    u = node(neighbors=[1, 2])
    u.receive({1: msg(1, 1, color=2, b1=0b100), 2: msg(2, 1, b1=0b1001, b2=0b10000)})
    b1, b2, b3 = u.compute_bitmaps()
    assert bitmap_colors(b1) == [2]
    assert b2 == 0b1101
    assert b3 == 0b10000


def test_message_reused_while_unchanged():
    u = node(neighbors=[1])
    first = u.build_message()
    assert u.build_message() is first
    u.color = 1
    assert u.build_message() is not first


def test_describe_unpacks():
    d = msg(3, 7, mp1=[key(9, 4)], color=1, b1=0b11).describe()
    assert d["priority"] == (7, 3)
    assert d["max_prio1"] == [(9, 4)]
    assert d["bitmap1"] == [0, 1]


# -- rule R5 --------------------------------------------------------------------


def test_stop_when_neighborhood_quiet():
    u = node(neighbors=[1, 2])
    u.color = 0
    u.receive({1: msg(1, 1, color=1), 2: msg(2, 1, color=2)})
    u.compute_max_prios()
    assert u.should_stop()


def test_no_stop_while_a_neighbor_lists_something():
    u = node(neighbors=[1, 2])
    u.color = 0
    u.receive({1: msg(1, 1, color=1), 2: msg(2, 1, color=2, mp2=[key(4, 9)])})
    u.compute_max_prios()
    assert not u.should_stop()


def test_uncolored_never_stops():
    assert not node().should_stop()


# -- rule R6 --------------------------------------------------------------------


def test_one_miss_reuses_last_message():
    u = node(neighbors=[1, 2])
    m1 = msg(1, 5)
    u.receive({1: m1, 2: msg(2, 1)})
    u.receive({2: msg(2, 1)})
    assert u.last[1] is m1
    assert u.misses[1] == 1
    assert 1 in u.neighbors


def test_threshold_misses_evict():
    u = node(neighbors=[1, 2], r6_threshold=3)
    u.receive({1: msg(1, 5), 2: msg(2, 1)})
    for _ in range(3):
        u.receive({2: msg(2, 1)})
    assert 1 not in u.neighbors and 1 not in u.last
    assert u.evicted == [1]


def test_miss_counter_resets():
    u = node(neighbors=[1])
    u.receive({})
    assert u.misses[1] == 1
    u.receive({1: msg(1, 5)})
    assert u.misses[1] == 0
    u.receive({})
    assert 1 in u.neighbors


def test_evicted_neighbor_readmitted():
    u = node(neighbors=[1])
    u.receive({})
    u.receive({})
    assert 1 not in u.neighbors
    u.receive({1: msg(1, 5)})
    assert 1 in u.neighbors


def test_changed_only_delivery_matches_full_inbox():
    full, delta = node(neighbors=[1, 2]), node(neighbors=[1, 2])
    a, b = msg(1, 5), msg(2, 6)
    full.receive({1: a, 2: b})
    delta.receive({1: a, 2: b}, missing=())
    full.receive({1: a})
    delta.receive({}, missing={2})
    assert full.misses == delta.misses
    assert full.last == delta.last


def test_parameters_validated():
    with pytest.raises(ValueError):
        node(size_mp1=0)
    with pytest.raises(ValueError):
        node(r6_threshold=1)
