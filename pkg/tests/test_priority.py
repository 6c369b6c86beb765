import pytest
from hypothesis import given, strategies as st

from wsncolor.priority import (
    Priority,
    address_of,
    by_priority,
    compute_prio,
    higher_priority,
    pack,
    priority_map,
    unpack,
)
from wsncolor.topology import from_edges

PATH5 = from_edges([(1, 2), (2, 3), (3, 4), (4, 5)])
K3 = from_edges([(1, 2), (1, 3), (2, 3)])

priorities = st.builds(Priority, st.integers(0, 50), st.integers(0, 30))


def test_isolated_node_has_prio_zero():
    assert compute_prio(from_edges([], [7]), 7) == 0


def test_path_prios():
    assert [compute_prio(PATH5, u) for u in range(1, 6)] == [3, 5, 6, 5, 3]


def test_k3_prios():
    assert {compute_prio(K3, u) for u in (1, 2, 3)} == {6}


def test_unknown_node():
    with pytest.raises(KeyError):
        compute_prio(K3, 9)


@pytest.mark.parametrize(
    "a, b, expected",
    [((6, 3), (5, 2), True), ((5, 2), (5, 4), True), ((3, 1), (6, 9), False)],
)
def test_higher_priority_examples(a, b, expected):
    assert higher_priority(Priority(*a), Priority(*b)) is expected


def test_self_comparison_is_an_error():
    with pytest.raises(ValueError):
        higher_priority(Priority(3, 1), Priority(4, 1))


@given(priorities, priorities)
def test_antisymmetry(a, b):
    if a.address == b.address:
        return
    assert higher_priority(a, b) != higher_priority(b, a)


@given(priorities, priorities, priorities)
def test_transitivity(a, b, c):
    if len({a.address, b.address, c.address}) < 3:
        return
    if higher_priority(a, b) and higher_priority(b, c):
        assert higher_priority(a, c)


@given(priorities, priorities)
def test_packing_preserves_order(a, b):
    if a.address == b.address:
        return
    assert (a.key > b.key) == higher_priority(a, b)
    assert unpack(a.key) == a
    assert address_of(a.key) == a.address


@given(st.dictionaries(st.integers(0, 100), st.integers(0, 20), min_size=1))
def test_sorting_is_a_strict_total_order(prios):
    pm = {u: Priority(p, u) for u, p in prios.items()}
    order = by_priority(pm)
    assert len(order) == len(set(order)) == len(pm)
    for hi, lo in zip(order, order[1:]):
        assert higher_priority(pm[hi], pm[lo])


def test_pack_rejects_out_of_range():
    with pytest.raises(ValueError):
        pack(-1, 0)
    with pytest.raises(ValueError):
        pack(0, 1 << 32)


def test_priority_map_override():
    pm = priority_map(PATH5, {u: 10 - u for u in range(1, 6)})
    assert by_priority(pm) == [1, 2, 3, 4, 5]
    with pytest.raises(ValueError):
        priority_map(PATH5, {1: 3})


def test_path_order():
    assert by_priority(priority_map(PATH5)) == [3, 2, 4, 1, 5]
