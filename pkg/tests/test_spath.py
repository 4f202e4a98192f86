import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bfr import spath
from oracles import bell, brute_partitions, brute_paths, card_bruteforce, catalan, path_from_cells


@pytest.mark.parametrize("path, expected", [
    ((0, 1, 2, 3), [(1, 1), (2, 1), (3, 1)]),
    ((0, 0, 0, 2, 4), [(3, 2), (4, 2)]),
    ((0, 0, 0, 0, 4), [(4, 4)]),
])
def test_jumps_examples(path, expected):
    assert spath.jumps(path) == expected


@pytest.mark.parametrize("bad", [(1, 1), (0, 2, 2), (0, 1, 0, 3), (0, 0, 1), (0, 1, 3, 3)])
def test_invalid_paths_rejected(bad):
    with pytest.raises(spath.PathError):
        spath.jumps(bad)


@pytest.mark.parametrize("path, card", [((0, 1, 2, 3), 1), ((0, 0, 0, 2, 4), 2), ((0, 0, 0, 0, 4), 1)])
def test_log_card_examples(path, card):
    assert spath.log_card(path) == pytest.approx(math.log(card), abs=1e-12)
    assert spath.card(path) == card == card_bruteforce(path)


def test_enumerate_small():
    assert set(spath.enumerate_paths(2)) == {(0, 0, 2), (0, 1, 2)}
    assert len(list(spath.enumerate_paths(3))) == 5
    paths = list(spath.enumerate_paths(4))
    assert len(paths) == 14
    assert sum(spath.card(p) for p in paths) == 15


@pytest.mark.parametrize("m", range(1, 8))
def test_enumeration_matches_brute_force(m):
    assert sorted(spath.enumerate_paths(m)) == sorted(brute_paths(m))


def test_enumeration_cap():
    with pytest.raises(spath.EnumerationCapError):
        list(spath.enumerate_paths(13))
    assert len(list(spath.enumerate_paths(3, cap=3))) == 5
    with pytest.raises(spath.EnumerationCapError):
        list(spath.enumerate_paths(4, cap=3))


def test_partitions_for_path_examples():
    assert spath.partitions_for_path((0, 1, 2)) == [frozenset({frozenset({1}), frozenset({2})})]
    assert spath.partitions_for_path((0, 0, 2)) == [frozenset({frozenset({1, 2})})]
    got = set(spath.partitions_for_path((0, 0, 0, 2, 4)))
    assert got == {frozenset({frozenset({1, 3}), frozenset({2, 4})}),
                   frozenset({frozenset({2, 3}), frozenset({1, 4})})}


@pytest.mark.parametrize("m", range(1, 11))
def test_catalan_and_bell(m):
    paths = list(spath.enumerate_paths(m))
    assert len(paths) == catalan(m)
    assert sum(spath.card(p) for p in paths) == bell(m)


@pytest.mark.parametrize("m", range(1, 7))
def test_partition_round_trip(m):
    groups = {}
    for cells in brute_partitions(m):
        groups.setdefault(path_from_cells(cells, m), set()).add(frozenset(frozenset(c) for c in cells))
    for path in spath.enumerate_paths(m):
        assert set(spath.partitions_for_path(path)) == groups[path]
        assert len(groups[path]) == spath.card(path)
    for cells in spath.set_partitions(m):
        assert spath.path_of_partition(cells, m) == path_from_cells(cells, m)


@st.composite
def spaths(draw, max_m=40):
    m = draw(st.integers(1, max_m))
    s = [m]
    for j in range(m - 1, 0, -1):
        s.append(draw(st.integers(0, min(j, s[-1]))))
    s.append(0)
    return tuple(reversed(s))


@settings(max_examples=200, deadline=None)
@given(spaths())
def test_path_properties(path):
    js = spath.jumps(path)
    assert sum(size for _, size in js) == len(path) - 1
    assert all(a < b for (a, _), (b, _) in zip(js, js[1:]))
    assert spath.log_card(path) == pytest.approx(math.log(spath.card(path)), rel=1e-12, abs=1e-12)
