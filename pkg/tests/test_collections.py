from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from pico.collections import (
    Multiset,
    Sequence,
    StructureError,
    WindowingPolicy,
    Windower,
    indexed_windows,
    is_time_ordered,
    k_selection,
    partition,
    sequence,
    stream_windows,
    time_reorder,
    windowed_view,
)
from strategies import timestamped

policies = st.builds(
    WindowingPolicy,
    size=st.integers(1, 12),
    slide=st.integers(1, 12),
    basis=st.sampled_from(["count", "time"]),
)


def as_lists(windows):
    return [(i, list(w.items)) for i, w in windows]


def test_count_window_examples():
    s = sequence("abcdefg")
    got = [w.values() for w in windowed_view(s, WindowingPolicy(5, 2, "count"))]
    assert got == [tuple("abcde"), tuple("cdefg"), tuple("efg"), ("g",)]
    got = [w.values() for w in windowed_view(s, WindowingPolicy(5, 5, "count"))]
    assert got == [tuple("abcde"), tuple("fg")]


def test_windows_are_time_reordered():
    s = Sequence(((3, "x"), (1, "y")))
    assert [w.items for w in windowed_view(s, WindowingPolicy(2, 2, "count"))] == [((1, "y"), (3, "x"))]


def test_time_windows_skip_empty_ones():
    s = Sequence(((0, "a"), (1, "b"), (7, "c")))
    got = as_lists(indexed_windows(s, WindowingPolicy(2, 2, "time")))
    assert got == [(0, [(0, "a"), (1, "b")]), (3, [(7, "c")])]


@given(timestamped, policies)
def test_windowed_view_matches_oracle(items, w):
    s = Sequence(tuple(items))
    got = as_lists(indexed_windows(s, w))
    assert got == oracles.windows(items, w.size, w.slide, w.basis)
    assert all(is_time_ordered(win) for win in windowed_view(s, w))


@given(timestamped, st.integers(1, 10))
def test_tumbling_count_windows_partition_the_sequence(items, n):
    s = Sequence(tuple(items))
    wins = windowed_view(s, WindowingPolicy(n, n, "count"))
    assert Counter(x for w in wins for x in w.items) == Counter(items)


@given(timestamped, policies)
def test_every_item_is_in_some_window_when_slide_fits(items, w):
    if w.slide > w.size:
        return
    s = Sequence(tuple(items))
    covered = Counter(x for win in windowed_view(s, w) for x in win.items)
    assert set(covered) == set(items)


@given(st.lists(st.tuples(st.integers(0, 60), st.integers(0, 9)), max_size=40).map(sorted), policies)
def test_incremental_windows_agree_with_bounded_ones_on_ordered_input(items, w):
    # On time-ordered input nothing is late, so streaming and bounded windowing agree.
    late = []
    got = list(stream_windows(items, w, late.append))
    assert as_lists(got) == as_lists(indexed_windows(Sequence(tuple(items)), w))
    assert late == [0]


def test_late_items_are_dropped_and_counted():
    win = Windower(WindowingPolicy(2, 2, "time"))
    closed = []
    for t, v in [(0, "a"), (5, "b"), (1, "late"), (5, "c")]:
        closed += win.push(t, v)
    closed += win.flush()
    assert [(i, w.values()) for i, w in closed] == [(0, ("a",)), (2, ("b", "c"))]
    assert win.late == 1


def test_items_in_gaps_between_windows_are_not_late():
    win = Windower(WindowingPolicy(1, 3, "time"))
    for t in (0, 1, 2, 3, 4):
        win.push(t, t)
    assert win.late == 0


def test_policy_validation():
    with pytest.raises(ValueError):
        WindowingPolicy(0, 1)
    with pytest.raises(ValueError):
        WindowingPolicy(1, 1, "sessions")
    assert WindowingPolicy(3, 3).tumbling
    assert str(WindowingPolicy(10, 5, "count")) == "(10,5,count)"


@given(st.integers(0, 200), st.integers(1, 20), st.integers(1, 20))
def test_time_windows_of(t, size, slide):
    w = WindowingPolicy(size, slide, "time")
    brute = [i for i in range(t // slide + 2) if i * slide <= t < i * slide + size]
    assert list(w.time_windows_of(t)) == brute


def test_windowing_a_bag_is_an_error():
    with pytest.raises(StructureError):
        windowed_view(Multiset((1, 2)), WindowingPolicy(1, 1))


# -- partitioning and ordering -----------------------------------------------------------------


@given(timestamped)
def test_partition_is_a_disjoint_cover(items):
    s = Sequence(tuple(items))
    groups = partition(s, lambda v: v % 3)
    assert sum(len(g) for g in groups.values()) == len(items)
    for k, g in groups.items():
        assert g == k_selection(s, lambda v: v % 3, k)
        assert len(g) > 0


def test_partition_bag():
    groups = partition(Multiset((("a", 1), ("b", 2), ("a", 3))), lambda v: v[0])
    assert groups == {"a": Multiset((("a", 1), ("a", 3))), "b": Multiset((("b", 2),))}


@given(timestamped)
def test_time_reorder_is_stable(items):
    s = time_reorder(Sequence(tuple(items)))
    assert is_time_ordered(s)
    assert list(s.items) == sorted(items, key=lambda tv: tv[0])


def test_time_reorder_rejects_streams_and_bags():
    with pytest.raises(StructureError):
        time_reorder(Sequence((), bounded=False))
    with pytest.raises(StructureError):
        time_reorder(Multiset())


def test_multiset_equality_ignores_order():
    assert Multiset((1, 2, 2)) == Multiset((2, 1, 2))
    assert Multiset((1, 2)) != Multiset((1, 2, 2))
