"""Shared brute-force oracles.

These are deliberately naive re-derivations written from the definitions,
without touching the library's vectorized paths.
"""
import itertools
import math

import numpy as np
import pytest

from msseg.multiscale import multiscale_statistic


def naive_penalty(kind, length, n, seg_length):
    if kind == "smuce":
        return math.sqrt(2 * math.log(math.e * n / length))
    if kind == "fdrseg":
        return math.sqrt(2 * math.log(math.e * seg_length / length))
    return 0.0


def naive_band(y, i, j, members, kind, eta, sigma=1.0):
    """Intersection of per-member intervals for the piece [i, j)."""
    n = len(y)
    lo, hi = -math.inf, math.inf
    for s, e in members:
        if i <= s and e <= j:
            L = e - s
            half = sigma * (eta + naive_penalty(kind, L, n, j - i)) / math.sqrt(L)
            m = sum(y[s:e]) / L
            lo, hi = max(lo, m - half), min(hi, m + half)
    return lo, hi


def full_members(n):
    return [(s, e) for s in range(n) for e in range(s + 1, n + 1)]


def exhaustive_min_jumps(y, members, kind, eta, sigma=1.0, slack=1e-9):
    """Least jump count over all 2^(n-1) partitions with non-empty bands."""
    n = len(y)
    ok = {}
    best = None
    for mask in itertools.product((0, 1), repeat=n - 1):
        cuts = [0] + [k + 1 for k, bit in enumerate(mask) if bit] + [n]
        jumps = len(cuts) - 2
        if best is not None and jumps >= best:
            continue
        feasible = True
        for a, b in zip(cuts[:-1], cuts[1:]):
            if (a, b) not in ok:
                lo, hi = naive_band(y, a, b, members, kind, eta, sigma)
                ok[(a, b)] = lo <= hi + slack
            if not ok[(a, b)]:
                feasible = False
                break
        if feasible:
            best = jumps
    return best


def exhaustive_best_approx(f, k):
    """Least squared error over all grid step functions with at most ``k`` jumps."""
    f = np.asarray(f, dtype=float)
    n = f.size
    best = math.inf
    for j in range(0, min(k, n - 1) + 1):
        for inner in itertools.combinations(range(1, n), j):
            cuts = (0,) + inner + (n,)
            err = sum(float(np.sum((f[a:b] - f[a:b].mean()) ** 2)) for a, b in zip(cuts[:-1], cuts[1:]))
            best = min(best, err)
    return best / n


def assert_certified(y, est, system, tol=1e-9):
    """Feasibility certificate recomputed through the public statistic."""
    t = multiscale_statistic(y, est.fit, system, est.penalty, est.sigma)
    assert t <= est.eta + tol, (t, est.eta)
    return t


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
