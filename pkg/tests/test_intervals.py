import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msseg.intervals import (GridInterval, IntervalSystem, contained_in, dyadic_partition_members,
                             enumerate_system, is_normal)

KINDS = ("full", "dyadic-partition", "dyadic-length")


def test_grid_interval_validation():
    with pytest.raises(ValueError):
        GridInterval(3, 3)
    with pytest.raises(ValueError):
        GridInterval(-1, 2)
    I = GridInterval(2, 5)
    assert I.cells == 3 and I.length(10) == pytest.approx(0.3)
    assert GridInterval(3, 4) in I and GridInterval(1, 4) not in I


def test_full_count_n4():
    assert len(enumerate_system(IntervalSystem("full", 4))) == 10


def test_dyadic_length_n4():
    members = enumerate_system(IntervalSystem("dyadic-length", 4))
    assert len(members) == 8
    assert sorted({m.cells for m in members}) == [1, 2, 4]


def test_dyadic_partition_n8():
    members = enumerate_system(IntervalSystem("dyadic-partition", 8))
    assert len(members) == 15
    assert {(m.start, m.end) for m in members if m.cells == 1} == {(i, i + 1) for i in range(8)}
    assert {(m.start, m.end) for m in members if m.cells == 4} == {(0, 4), (4, 8)}


def test_dyadic_partition_clipping_n12():
    m = {tuple(r) for r in dyadic_partition_members(12)}
    # widths ceil(12/2^j) = 12, 6, 3, 2 with the last level clipped at 12
    assert (9, 12) in m and (10, 12) in m and (12, 14) not in m
    assert all((i, i + 1) in m for i in range(12))


@pytest.mark.parametrize("kind", KINDS)
def test_order_and_uniqueness(kind):
    mem = [(I.start, I.end) for I in IntervalSystem(kind, 37)]
    assert mem == sorted(set(mem))


@pytest.mark.parametrize("n", [1, 2, 7, 16, 33, 64])
def test_full_cardinality_double_loop(n):
    ref = {(i, j) for i in range(n) for j in range(i + 1, n + 1)}
    got = {(I.start, I.end) for I in IntervalSystem("full", n)}
    assert got == ref and len(IntervalSystem("full", n)) == n * (n + 1) // 2


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("n", [1, 3, 8, 13, 64])
def test_single_cells_present(kind, n):
    got = {(I.start, I.end) for I in IntervalSystem(kind, n)}
    assert all((i, i + 1) in got for i in range(n))


@pytest.mark.parametrize("n", [5, 8, 100])
def test_dyadic_length_bound(n):
    assert len(IntervalSystem("dyadic-length", n)) <= n * (int(math.log2(n)) + 1)


def test_contained_in_examples():
    full = IntervalSystem("full", 10)
    assert contained_in(full, GridInterval(4, 5)) == [GridInterval(4, 5)]
    assert len(contained_in(full, GridInterval(0, 3))) == 6
    dl = IntervalSystem("dyadic-length", 8)
    got = contained_in(dl, GridInterval(0, 6))
    ref = [I for I in enumerate_system(dl) if I in GridInterval(0, 6)]
    assert got == ref
    assert {I.cells for I in got} == {1, 2, 4}


@pytest.mark.parametrize("kind", KINDS)
def test_contained_in_matches_filter(kind, rng):
    for _ in range(50):
        n = int(rng.integers(1, 65))
        s = int(rng.integers(0, n))
        e = int(rng.integers(s + 1, n + 1))
        sys_ = IntervalSystem(kind, n)
        seg = GridInterval(s, e)
        assert contained_in(sys_, seg) == [I for I in enumerate_system(sys_) if I in seg]


def test_custom_members():
    s = IntervalSystem.from_members(4, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (0, 1)])
    assert len(s) == 5
    with pytest.raises(ValueError):
        IntervalSystem.from_members(4, [(0, 5)])


def test_is_normal_full_n16_c15_matches_brute_force():
    s = IntervalSystem("full", 16)
    # brute force over the quarter-cell probe grid: the probe [1/4, 2) in cell
    # units has length 1.75 > 1.5 but its longest grid sub-interval is one cell
    assert is_normal(s, 1.5, 4) == _naive_is_normal(s, 1.5, 4)
    assert is_normal(s, 1.5, 4) is False


def test_is_normal_dyadic_partition_n16_c2():
    assert is_normal(IntervalSystem("dyadic-partition", 16), 2.0, 4)


def test_is_normal_rejects_missing_cells():
    members = [tuple(r) for r in dyadic_partition_members(12) if r[1] - r[0] > 1]
    assert not is_normal(IntervalSystem.from_members(12, members), 2.0, 4)


def test_is_normal_argument_checks():
    with pytest.raises(ValueError):
        is_normal(IntervalSystem("full", 4), 1.0)
    with pytest.raises(ValueError):
        is_normal(IntervalSystem("full", 4), 2.0, probe_resolution=1)


def test_is_normal_full_small_constants():
    failures = [(n, c) for n in (8, 16, 32) for c in (1.25, 1.5, 2.0)
                if not is_normal(IntervalSystem("full", n), c, 4)]
    assert failures == []


def _naive_is_normal(system, c, p):
    """Direct scan of probe intervals against the member list."""
    n = system.n
    mem = [(I.start, I.end) for I in system]
    for a in range(p * n + 1):
        for b in range(a + 1, p * n + 1):
            if (b - a) <= c * p:
                continue
            best = max((e - s for s, e in mem if s * p >= a and e * p <= b), default=0)
            if best * p * c < (b - a):
                return False
    return all((i, i + 1) in set(mem) for i in range(n))


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("c", [2.0, 2.5, 3.0, 4.5])
def test_is_normal_matches_naive_scan(kind, c):
    for n in (5, 8, 11):
        s = IntervalSystem(kind, n)
        assert is_normal(s, c, 2) == _naive_is_normal(s, c, 2)


def test_full_system_is_three_normal():
    # a probe just over c cells can lose almost a cell at each end,
    # which the full system survives once c >= 3
    for n in (8, 16, 32, 100):
        assert is_normal(IntervalSystem("full", n), 3.0, 4)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(KINDS), st.integers(1, 64))
def test_members_valid(kind, n):
    m = IntervalSystem(kind, n).members()
    assert ((m[:, 0] >= 0) & (m[:, 0] < m[:, 1]) & (m[:, 1] <= n)).all()
