"""Minimal-jump segmentation under the multiscale side constraint.

For a candidate piece covering cells ``i .. j-1`` every system member ``I``
inside it restricts the piece value ``c`` to

    [mean_I - sigma (eta + s_I) / sqrt(|I|), mean_I + sigma (eta + s_I) / sqrt(|I|)]

(``|I|`` in cells), and the feasible band is the intersection of these
intervals. Stage 1 finds the least number of jumps admitting a partition into
pieces with non-empty bands; stage 2 picks, among such partitions, the one
with the smallest residual sum of squares after clipping each piece mean into
its band.

For the ``smuce`` and ``none`` penalties the per-member intervals do not depend
on the piece, so bands shrink as a piece grows in either direction and the
feasible starts for a fixed end form a suffix. Both stages exploit this
through one sweep over piece ends that keeps ``band(i, e)`` for all ``i``.
``fdrseg`` penalties depend on the piece and use an all-pairs table instead.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .intervals import IntervalSystem
from .multiscale import _statistic_on_partition, penalty_array
from .signals import Observation, StepFunction

__all__ = [
    "SLACK",
    "FeasibleBand",
    "Estimate",
    "InfeasibleError",
    "segment_band",
    "prune_certificate",
    "fit",
]

SLACK = 1e-9
_TIE_RTOL = 1e-12


class InfeasibleError(ValueError):
    """Some single cell admits no value at the requested threshold."""

    def __init__(self, cell: int, message: str | None = None):
        self.cell = cell
        super().__init__(message or f"cell {cell} has an empty feasible band")


@dataclass(frozen=True)
class FeasibleBand:
    lo: float
    hi: float

    @property
    def empty(self) -> bool:
        return self.lo > self.hi + SLACK

    def clip(self, value: float) -> float:
        if self.lo > self.hi:
            return 0.5 * (self.lo + self.hi)
        return min(max(value, self.lo), self.hi)


@dataclass(frozen=True)
class Estimate:
    """Fitted step function together with its constraint metadata."""

    fit: StepFunction
    cuts: tuple
    values: tuple
    bands: tuple
    eta: float
    n: int
    system: str
    penalty: str
    sigma: float = 1.0
    certificate: float = -math.inf
    meta: dict = field(default_factory=dict)

    @property
    def jumps(self) -> int:
        return len(self.cuts) - 2

    @property
    def change_points(self) -> np.ndarray:
        return np.asarray(self.cuts[1:-1], dtype=float) / self.n

    def to_dict(self) -> dict:
        return {
            "fit": self.fit.to_dict(),
            "cuts": list(self.cuts),
            "values": list(self.values),
            "jumps": self.jumps,
            "bands": [[b.lo, b.hi] for b in self.bands],
            "eta": self.eta,
            "n": self.n,
            "system": self.system,
            "penalty": self.penalty,
            "sigma": self.sigma,
            "certificate": self.certificate,
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "Estimate":
        return cls(
            fit=StepFunction.from_dict(d["fit"]),
            cuts=tuple(int(c) for c in d["cuts"]),
            values=tuple(float(v) for v in d["values"]),
            bands=tuple(FeasibleBand(float(lo), float(hi)) for lo, hi in d["bands"]),
            eta=float(d["eta"]),
            n=int(d["n"]),
            system=d["system"],
            penalty=d["penalty"],
            sigma=float(d.get("sigma", 1.0)),
            certificate=float(d.get("certificate", -math.inf)),
            meta=dict(d.get("meta", {})),
        )

    @classmethod
    def from_json(cls, text: str) -> "Estimate":
        return cls.from_dict(json.loads(text))


def _data(y):
    if isinstance(y, Observation):
        return y.y
    return np.asarray(y, dtype=float)


def segment_band(y, i: int, j: int, system: IntervalSystem, penalty: str, eta: float,
                 sigma: float = 1.0) -> FeasibleBand:
    """Intersection of the member constraints inside cells ``i .. j-1``.

    Direct evaluation over the contained members; the solver uses faster
    equivalent paths.
    """
    y = _data(y)
    n = y.size
    if not 0 <= i < j <= n:
        raise ValueError(f"invalid segment [{i}, {j})")
    m = system.contained_members(i, j)
    csum = np.concatenate([[0.0], np.cumsum(y)])
    lengths = m[:, 1] - m[:, 0]
    means = (csum[m[:, 1]] - csum[m[:, 0]]) / lengths
    half = sigma * (eta + penalty_array(penalty, lengths, n, j - i)) / np.sqrt(lengths)
    return FeasibleBand(float(np.max(means - half)), float(np.min(means + half)))


# ---------------------------------------------------------------------------
# column sweep (piece-independent penalties)

class _Sweep:
    """Yields ``band(i, e)`` for all ``i < e`` as ``e`` runs from 1 to n."""

    def __init__(self, y, system, penalty, eta, sigma):
        self.y = y
        self.n = y.size
        self.csum = np.concatenate([[0.0], np.cumsum(y)])
        self.system = system
        self.kind = system.kind
        if self.kind == "dyadic-length":
            self.widths = system.member_lengths.astype(np.int64)
            self.half_w = sigma * (eta + penalty_array(penalty, self.widths, self.n)) / np.sqrt(self.widths)
        elif self.kind == "full":
            w = np.arange(1, self.n + 1)
            self.half_w = sigma * (eta + penalty_array(penalty, w, self.n)) / np.sqrt(w)
        else:
            m = system.members()
            order = np.lexsort((m[:, 0], m[:, 1]))
            m = m[order]
            self.by_end = np.searchsorted(m[:, 1], np.arange(self.n + 2))
            self.m = m
            lengths = m[:, 1] - m[:, 0]
            self.half_m = sigma * (eta + penalty_array(penalty, lengths, self.n)) / np.sqrt(lengths)

    def _members_ending(self, e):
        if self.kind == "dyadic-length":
            ok = self.widths <= e
            s = e - self.widths[ok]
            half = self.half_w[ok]
        elif self.kind == "full":
            s = np.arange(e)
            half = self.half_w[(e - s) - 1]
        else:
            a, b = self.by_end[e], self.by_end[e + 1]
            s = self.m[a:b, 0]
            half = self.half_m[a:b]
        mean = (self.csum[e] - self.csum[s]) / (e - s)
        return s, mean - half, mean + half

    def __iter__(self):
        lo = np.empty(0)
        hi = np.empty(0)
        for e in range(1, self.n + 1):
            s, mlo, mhi = self._members_ending(e)
            col_lo = np.full(e, -np.inf)
            col_hi = np.full(e, np.inf)
            # at most one member per (start, end)
            col_lo[s] = mlo
            col_hi[s] = mhi
            # members starting at s or later: suffix extremes
            col_lo = np.maximum.accumulate(col_lo[::-1])[::-1]
            col_hi = np.minimum.accumulate(col_hi[::-1])[::-1]
            lo = np.append(lo, -np.inf)
            hi = np.append(hi, np.inf)
            np.maximum(lo, col_lo, out=lo)
            np.minimum(hi, col_hi, out=hi)
            yield e, lo, hi


def _leftmost_starts(sweep: _Sweep) -> np.ndarray:
    """``left[e]`` = smallest ``i`` with a non-empty band on ``[i, e)``."""
    n = sweep.n
    left = np.zeros(n + 1, dtype=np.int64)
    for e, lo, hi in sweep:
        ok = lo <= hi + SLACK
        if not ok[e - 1]:
            raise InfeasibleError(e - 1)
        left[e] = int(np.argmax(ok))
    return left


def prune_certificate(y, i: int, system: IntervalSystem, penalty: str, eta: float,
                      sigma: float = 1.0) -> int:
    """Largest ``j`` such that the band on cells ``i .. j-1`` is non-empty.

    For piece-independent penalties emptiness is monotone in ``j`` and a
    binary search suffices; fdrseg falls back to scanning every ``j``.
    """
    y = _data(y)
    n = y.size
    if segment_band(y, i, i + 1, system, penalty, eta, sigma).empty:
        raise InfeasibleError(i)
    if penalty == "fdrseg":
        best = i + 1
        for j in range(i + 2, n + 1):
            if not segment_band(y, i, j, system, penalty, eta, sigma).empty:
                best = j
        return best
    lo_j, hi_j = i + 1, n
    while lo_j < hi_j:
        mid = (lo_j + hi_j + 1) // 2
        if segment_band(y, i, mid, system, penalty, eta, sigma).empty:
            hi_j = mid - 1
        else:
            lo_j = mid
    return lo_j


def _piece_cost(csum, csum2, i, j, lo, hi):
    """Residual sum of squares with the piece mean clipped into ``[lo, hi]``."""
    L = (j - i).astype(float)
    S = csum[j] - csum[i]
    mean = S / L
    c = np.where(lo <= hi, np.clip(mean, lo, np.maximum(lo, hi)), 0.5 * (lo + hi))
    sse = np.maximum(csum2[j] - csum2[i] - S * mean, 0.0)
    return sse + L * (mean - c) ** 2, c


def _windows(left: np.ndarray, n: int):
    """Stage 1 summary: minimal pieces K and the admissible range of each cut."""
    pieces = np.zeros(n + 1, dtype=np.int64)
    for e in range(1, n + 1):
        pieces[e] = pieces[left[e]] + 1
    K = int(pieces[n])
    # forward: cut t may sit anywhere in [t, max{j : pieces[j] <= t}]
    fwd_hi = np.searchsorted(pieces, np.arange(K + 1), side="right") - 1
    # backward greedy from the end
    back = [n]
    for _ in range(K):
        back.append(int(left[back[-1]]))
    wins = []
    for t in range(K + 1):
        a = max(t, back[K - t])
        b = min(int(fwd_hi[t]), n - (K - t))
        wins.append((a, b))
    wins[0], wins[K] = (0, 0), (n, n)
    return K, wins


def _select(G_next, costs, feas, js):
    """Row-wise minimum with ties resolved to the smallest cut."""
    total = np.where(feas, costs + G_next[None, :], np.inf)
    best = total.min(axis=1)
    tol = _TIE_RTOL * (1.0 + np.abs(best))
    pick = np.argmax(total <= (best + tol)[:, None], axis=1)
    return best, js[pick]


def _fit_monotone(y, system, penalty, eta, sigma):
    n = y.size
    left = _leftmost_starts(_Sweep(y, system, penalty, eta, sigma))
    K, wins = _windows(left, n)
    # ends that are needed, with the start range each end must cover
    need_lo = np.full(n + 1, n + 1)
    need_hi = np.full(n + 1, -1)
    for t in range(K):
        (a0, b0), (a1, b1) = wins[t], wins[t + 1]
        need_lo[a1:b1 + 1] = np.minimum(need_lo[a1:b1 + 1], a0)
        need_hi[a1:b1 + 1] = np.maximum(need_hi[a1:b1 + 1], b0)
    cols = {}
    for e, lo, hi in _Sweep(y, system, penalty, eta, sigma):
        if need_hi[e] >= 0:
            a = int(need_lo[e])
            b = min(int(need_hi[e]), e - 1)
            cols[e] = (a, lo[a:b + 1].copy(), hi[a:b + 1].copy())

    def band_matrix(starts, ends):
        LO = np.full((starts.size, ends.size), np.inf)
        HI = np.full((starts.size, ends.size), -np.inf)
        for c, e in enumerate(ends):
            a, lo, hi = cols[int(e)]
            idx = starts - a
            ok = (idx >= 0) & (idx < lo.size)
            LO[ok, c] = lo[idx[ok]]
            HI[ok, c] = hi[idx[ok]]
        return LO, HI

    return _stage_two(y, K, wins, band_matrix)


def _fit_tabulated(y, system, penalty, eta, sigma):
    """All-pairs path for piece-dependent penalties (small n)."""
    n = y.size
    LO = np.full((n + 1, n + 1), np.inf)
    HI = np.full((n + 1, n + 1), -np.inf)
    for i in range(n):
        for j in range(i + 1, n + 1):
            band = segment_band(y, i, j, system, penalty, eta, sigma)
            LO[i, j], HI[i, j] = band.lo, band.hi
    feas = LO <= HI + SLACK
    for i in range(n):
        if not feas[i, i + 1]:
            raise InfeasibleError(i)
    # stage 1: reachability by exact piece count
    INF = n + 1
    pieces = np.full(n + 1, INF)
    pieces[0] = 0
    for j in range(1, n + 1):
        prev = pieces[:j][feas[:j, j]]
        pieces[j] = prev.min() + 1
    K = int(pieces[n])
    # positions reachable with exactly t pieces from the left and K - t to the right
    fwd = np.zeros((K + 1, n + 1), dtype=bool)
    fwd[0, 0] = True
    for t in range(1, K + 1):
        fwd[t] = (fwd[t - 1][:, None] & feas).any(axis=0)
    bwd = np.zeros((K + 1, n + 1), dtype=bool)
    bwd[K, n] = True
    for t in range(K - 1, -1, -1):
        bwd[t] = (feas & bwd[t + 1][None, :]).any(axis=1)
    allowed = [np.flatnonzero(fwd[t] & bwd[t]) for t in range(K + 1)]

    def band_matrix(starts, ends):
        return LO[np.ix_(starts, ends)], HI[np.ix_(starts, ends)]

    return _stage_two(y, K, allowed, band_matrix)


def _stage_two(y, K, wins, band_matrix):
    n = y.size
    csum = np.concatenate([[0.0], np.cumsum(y)])
    csum2 = np.concatenate([[0.0], np.cumsum(y * y)])

    def positions(w):
        if isinstance(w, tuple):
            return np.arange(w[0], w[1] + 1)
        return np.asarray(w)

    pos = [positions(w) for w in wins]
    G = [None] * (K + 1)
    choice = [None] * (K + 1)
    G[K] = np.zeros(1)
    for t in range(K - 1, -1, -1):
        starts, ends = pos[t], pos[t + 1]
        LO, HI = band_matrix(starts, ends)
        I, J = np.meshgrid(starts, ends, indexing="ij")
        feas = (J > I) & (LO <= HI + SLACK)
        with np.errstate(invalid="ignore"):
            cost, _ = _piece_cost(csum, csum2, I, np.maximum(J, I + 1), LO, HI)
        G[t], choice[t] = _select(G[t + 1], cost, feas, ends)
    cuts = [0]
    for t in range(K):
        row = int(np.searchsorted(pos[t], cuts[-1]))
        cuts.append(int(choice[t][row]))
    cuts = np.asarray(cuts)
    values, bands = [], []
    for i, j in zip(cuts[:-1], cuts[1:]):
        LO, HI = band_matrix(np.array([i]), np.array([j]))
        band = FeasibleBand(float(LO[0, 0]), float(HI[0, 0]))
        values.append(band.clip((csum[j] - csum[i]) / (j - i)))
        bands.append(band)
    return cuts, values, bands


def fit(y, system: IntervalSystem, penalty: str, eta: float, sigma: float = 1.0) -> Estimate:
    """Least-jump step function satisfying the multiscale constraint at ``eta``.

    ``sigma`` divides the local sums (pass the known noise level when ``eta``
    was calibrated at unit noise). Among minimal-jump partitions the one with
    the least clipped residual sum of squares is returned; exact cost ties go
    to the lexicographically smallest cut sequence.
    """
    y = _data(y)
    n = y.size
    if system.n != n:
        raise ValueError("interval system does not match the data length")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if penalty == "fdrseg":
        cuts, values, bands = _fit_tabulated(y, system, penalty, eta, sigma)
    else:
        cuts, values, bands = _fit_monotone(y, system, penalty, eta, sigma)
    cert = _statistic_on_partition(y, cuts, values, system, penalty, sigma)
    return Estimate(
        fit=StepFunction.from_partition(cuts, values, n),
        cuts=tuple(int(c) for c in cuts),
        values=tuple(float(v) for v in values),
        bands=tuple(bands),
        eta=float(eta),
        n=n,
        system=system.kind,
        penalty=penalty,
        sigma=float(sigma),
        certificate=float(cert),
    )
