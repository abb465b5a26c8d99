"""Best step approximants, oracle segmentations and loss metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .signals import (ContinuousSignal, Observation, StepFunction, _adaptive_integral,
                      cell_means)

__all__ = [
    "ApproximantCurve",
    "OracleRisk",
    "best_approximant",
    "approximation_errors",
    "approx_error_curve",
    "oracle_segmentation",
    "oracle_risk",
    "equal_partition",
    "lp_loss",
    "loglog_slope",
]


@dataclass
class ApproximantCurve:
    ks: np.ndarray
    errors: np.ndarray
    approximants: list = field(default_factory=list)
    slope: float | None = None

    @property
    def gamma_hat(self) -> float | None:
        return None if self.slope is None else -self.slope


@dataclass(frozen=True)
class OracleRisk:
    tau: tuple
    bias_sq: float
    variance: float
    discrete_bias_sq: float

    @property
    def total(self) -> float:
        return self.bias_sq + self.variance


def _sse_matrix(f: np.ndarray) -> np.ndarray:
    """``C[i, j]`` = squared error of the best constant on cells ``i .. j-1``.

    Built column by column with Welford updates, so constant runs give
    exactly zero instead of a prefix-sum cancellation residue.
    """
    n = f.size
    C = np.full((n + 1, n + 1), np.inf)
    mean = np.zeros(n)
    sse = np.zeros(n)
    for j in range(n):
        # extend every segment [i, j) with i <= j by cell j
        L = j - np.arange(j + 1)
        d = f[j] - mean[:j + 1]
        mean[:j + 1] += d / (L + 1)
        sse[:j + 1] += d * (f[j] - mean[:j + 1])
        C[:j + 1, j + 1] = np.maximum(sse[:j + 1], 0.0)
    return C


def _cost_to_go(C: np.ndarray, max_pieces: int) -> np.ndarray:
    """``E[s, i]`` = least error covering cells ``i .. n-1`` with exactly ``s`` pieces."""
    n = C.shape[0] - 1
    E = np.full((max_pieces + 1, n + 1), np.inf)
    E[0, n] = 0.0
    for s in range(1, max_pieces + 1):
        E[s] = (C + E[s - 1][None, :]).min(axis=1)
    return E


def _trace(C, E, pieces, rtol=1e-12):
    n = C.shape[0] - 1
    cuts, i = [0], 0
    for s in range(pieces, 0, -1):
        total = C[i] + E[s - 1]
        best = E[s, i]
        j = int(np.argmax(total <= best + rtol * (1.0 + abs(best))))
        cuts.append(j)
        i = j
    assert cuts[-1] == n
    return cuts


def _build(f, cuts):
    vals = [math.fsum(f[a:b]) / (b - a) for a, b in zip(cuts[:-1], cuts[1:])]
    return StepFunction.from_partition(cuts, vals, f.size)


def approximation_errors(f_cells, K: int, C=None, E=None):
    """Best grid approximants with at most ``k`` jumps for ``k = 0..K``.

    Returns ``(errors, approximants)`` with L2 errors on the cell grid.
    """
    f = np.asarray(f_cells, dtype=float)
    n = f.size
    C = _sse_matrix(f) if C is None else C
    P = min(K + 1, n)
    E = _cost_to_go(C, P) if E is None else E
    errs, apps = [], []
    for k in range(K + 1):
        cand = E[1:min(k + 1, n) + 1, 0]
        best = cand.min()
        # fewest pieces attaining the optimum
        pieces = 1 + int(np.argmax(cand <= best + 1e-12 * (1.0 + best)))
        cuts = _trace(C, E, pieces)
        g = _build(f, cuts)
        apps.append(g)
        errs.append(math.sqrt(max(best, 0.0) / n))
    return np.asarray(errs), apps


def best_approximant(f_cells, k: int) -> StepFunction:
    """Grid step function with at most ``k`` jumps closest to ``f_cells`` in L2.

    Ties resolve to the leftmost breakpoints.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    _, apps = approximation_errors(f_cells, k)
    return apps[k]


def loglog_slope(x, y):
    """Least-squares slope of ``log y`` on ``log x`` and its standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0) & np.isfinite(y)
    if ok.sum() < 2:
        return None, None
    from scipy.stats import linregress

    res = linregress(np.log(x[ok]), np.log(y[ok]))
    se = res.stderr if ok.sum() > 2 else None
    return float(res.slope), (None if se is None else float(se))


def approx_error_curve(f, n: int, K: int, k_min: int = 4) -> ApproximantCurve:
    """Errors of the best ``k``-jump grid approximants, ``k = 1..K``.

    The slope is fitted on ``k in [k_min, K]`` with zero errors dropped.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    cells = cell_means(f, n)
    errs, apps = approximation_errors(cells, K)
    ks = np.arange(1, K + 1)
    errs, apps = errs[1:], apps[1:]
    sel = ks >= k_min
    slope, _ = loglog_slope(ks[sel], errs[sel])
    return ApproximantCurve(ks, errs, apps, slope)


def _as_cuts(tau, n: int) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    cuts = np.rint(tau * n).astype(int)
    if (tau.size < 2 or tau[0] != 0.0 or tau[-1] != 1.0 or np.any(np.diff(cuts) <= 0)
            or not np.allclose(tau * n, cuts, rtol=0, atol=1e-9)):
        raise ValueError("tau must be a strictly increasing grid partition from 0 to 1")
    return cuts


def equal_partition(m: int) -> np.ndarray:
    return np.arange(m + 1) / m


def oracle_segmentation(y, tau) -> StepFunction:
    """Piecewise means of the data on the supplied partition."""
    y = y.y if isinstance(y, Observation) else np.asarray(y, dtype=float)
    cuts = _as_cuts(tau, y.size)
    return _build(y, list(cuts))


def _moments_on(f, a: float, b: float) -> tuple[float, float]:
    """``(int_a^b f, int_a^b f^2)``."""
    if isinstance(f, ContinuousSignal) and f.sample_term is not None:
        raise ValueError("sample-indexed signals have no continuum form")
    if isinstance(f, StepFunction) or (isinstance(f, ContinuousSignal) and f.step is not None):
        g = f if isinstance(f, StepFunction) else f.step
        bps = np.asarray(g.breakpoints)
        pts = np.unique(np.concatenate([[a, b], bps[(bps > a) & (bps < b)]]))
        vals = g(pts[:-1])
        w = np.diff(pts)
        return float(w @ vals), float(w @ vals ** 2)
    pts = _split_points(f, a, b)
    lo, hi = pts[:-1], pts[1:]
    one = _adaptive_integral(f.func, lo, hi, tol=1e-12).sum()
    two = _adaptive_integral(lambda x: f.func(x) ** 2, lo, hi, tol=1e-12).sum()
    return float(one), float(two)


def _split_points(f, a, b):
    d = np.asarray([x for x in getattr(f, "discontinuities", ()) if a < x < b])
    return np.unique(np.concatenate([[a, b], d]))


def oracle_risk(f, tau, sigma: float, n: int) -> OracleRisk:
    """Expected squared L2 risk of the oracle segmentation on ``tau``.

    ``bias_sq`` is the continuum distance to the best approximant with breaks
    at ``tau``; ``discrete_bias_sq`` is the same on the cell-mean grid.
    """
    cuts = _as_cuts(tau, n)
    bps = cuts / n
    bias = 0.0
    for a, b in zip(bps[:-1], bps[1:]):
        m1, m2 = _moments_on(f, a, b)
        bias += m2 - m1 * m1 / (b - a)
    cells = cell_means(f, n)
    dbias = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        seg = cells[a:b]
        dbias += float(np.sum((seg - seg.mean()) ** 2)) / n
    k = len(cuts) - 1
    return OracleRisk(tuple(float(b) for b in bps), float(max(bias, 0.0)), k * sigma ** 2 / n,
                      float(dbias))


def lp_loss(f, g: StepFunction, p: float = 2.0) -> float:
    """``||f - g||_{L^p}`` on [0, 1)."""
    if not 0 < p < math.inf:
        raise ValueError("p must be positive and finite")
    if isinstance(f, ContinuousSignal) and f.step is not None and f.sample_term is None:
        f = f.step
    if isinstance(f, StepFunction):
        pts = np.unique(np.concatenate([f.breakpoints, g.breakpoints]))
        diff = f(pts[:-1]) - g(pts[:-1])
        return float((np.diff(pts) @ np.abs(diff) ** p) ** (1.0 / p))
    if f.sample_term is not None:
        raise ValueError("sample-indexed signals have no continuum form")
    pts = np.unique(np.concatenate([g.breakpoints,
                                    [d for d in f.discontinuities if 0 < d < 1]]))
    lo, hi = pts[:-1], pts[1:]
    c = g(lo)
    with np.errstate(all="ignore"):
        pieces = _adaptive_integral(lambda x, rows: np.abs(f.func(x) - c[rows, None]) ** p,
                                    lo, hi, tol=1e-10, pass_rows=True)
    return float(pieces.sum() ** (1.0 / p))
