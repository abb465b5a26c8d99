"""Feature inference with simultaneous confidence.

Given a fit at threshold ``eta(beta)``, a local mean comparison on two flat
stretches ``I1`` and ``I2`` of the fit is certified when the fitted values are
separated by more than ``r_I1 + r_I2`` with ``r_I = 2 sigma (eta + s_I) / sqrt(|I|)``
(``|I|`` in cells). All certificates hold jointly with probability at least
``1 - beta``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .intervals import GridInterval, IntervalSystem
from .multiscale import penalty_array
from .signals import StepFunction
from .solver import Estimate

__all__ = [
    "ConfidenceParams",
    "JumpAssessment",
    "MonotonicityEntry",
    "FeatureReport",
    "r_value",
    "mean_order_claim",
    "monotonicity",
    "significant_jumps",
    "jump_distance",
    "count_modes_troughs",
    "feature_report",
    "default_window",
]


def default_window(n: int) -> int:
    """``floor(log n)`` cells, at least one."""
    return max(1, int(math.floor(math.log(n))))


@dataclass(frozen=True)
class ConfidenceParams:
    beta: float
    eta: float
    m: int | None = None

    def window(self, n: int) -> int:
        m = default_window(n) if self.m is None else int(self.m)
        if m < 1:
            raise ValueError("window m must be >= 1")
        return m


@dataclass(frozen=True)
class JumpAssessment:
    location: float
    cut: int
    left: tuple
    right: tuple
    significant: bool
    left_cells: int
    right_cells: int
    clipped: bool


@dataclass(frozen=True)
class MonotonicityEntry:
    index: int
    direction: str
    u_left: float
    l_left: float
    u_right: float
    l_right: float
    window: tuple
    note: str = ""


@dataclass
class FeatureReport:
    beta: float
    eta: float
    m: int
    jump_assessments: list = field(default_factory=list)
    monotonicity: list = field(default_factory=list)
    modes_lower_bound: int = 0
    troughs_lower_bound: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def annotation_table(self) -> str:
        """Whitespace table ``location type significant`` for plotting."""
        lines = ["# location type significant"]
        for a in self.jump_assessments:
            lines.append(f"{a.location:.10g} jump {int(a.significant)}")
        for e in self.monotonicity:
            if e.direction != "inconclusive":
                mid = 0.5 * (e.window[0] + e.window[1])
                lines.append(f"{mid:.10g} {e.direction} 1")
        return "\n".join(lines) + "\n"


def r_value(I: GridInterval, eta: float, penalty: str, segment: GridInterval | None,
            n: int, sigma: float = 1.0) -> float:
    """Half-width ``2 sigma (eta + s_I) / sqrt(n |I|)`` of the local mean certificate."""
    seg_cells = segment.cells if segment is not None else None
    if penalty == "fdrseg" and (segment is None or I not in segment):
        raise ValueError("fdrseg: interval must lie inside its segment")
    s = float(penalty_array(penalty, I.cells, n, seg_cells))
    return 2.0 * sigma * (eta + s) / math.sqrt(I.cells)


def _piece_of(est: Estimate, I: GridInterval) -> int:
    cuts = np.asarray(est.cuts)
    k = int(np.searchsorted(cuts, I.start, side="right") - 1)
    if I.end > cuts[k + 1]:
        raise ValueError(f"estimate is not constant on [{I.start}, {I.end})")
    return k


def _piece_interval(est: Estimate, k: int) -> GridInterval:
    return GridInterval(est.cuts[k], est.cuts[k + 1])


def mean_order_claim(est: Estimate, I1: GridInterval, I2: GridInterval,
                     params: ConfidenceParams) -> bool:
    """True iff the fit certifies ``mean_I1(f) > mean_I2(f)``."""
    k1, k2 = _piece_of(est, I1), _piece_of(est, I2)
    r1 = r_value(I1, params.eta, est.penalty, _piece_interval(est, k1), est.n, est.sigma)
    r2 = r_value(I2, params.eta, est.penalty, _piece_interval(est, k2), est.n, est.sigma)
    return est.values[k1] > est.values[k2] + r1 + r2


def _min_r_in_window(est: Estimate, system: IntervalSystem, params, lo: float, hi: float, k: int):
    """Smallest ``r_I`` over members inside the real window ``[lo, hi)`` (cells)."""
    a, b = int(math.ceil(lo - 1e-12)), int(math.floor(hi + 1e-12))
    if b <= a:
        return None
    m = system.contained_members(a, b)
    if m.size == 0:
        return None
    lengths = m[:, 1] - m[:, 0]
    seg = est.cuts[k + 1] - est.cuts[k]
    s = penalty_array(est.penalty, lengths, est.n, seg)
    r = 2.0 * est.sigma * (params.eta + s) / np.sqrt(lengths)
    return float(r.min())


def monotonicity(est: Estimate, system: IntervalSystem, params: ConfidenceParams) -> list:
    """Certified increase/decrease for each pair of adjacent pieces."""
    cuts = est.cuts
    out = []
    for i in range(len(est.values) - 1):
        a, b, c = cuts[i], cuts[i + 1], cuts[i + 2]
        wl, wr = 0.5 * (a + b), 0.5 * (b + c)
        rl = _min_r_in_window(est, system, params, wl, b, i)
        rr = _min_r_in_window(est, system, params, b, wr, i + 1)
        window = (wl / est.n, wr / est.n)
        if rl is None or rr is None:
            out.append(MonotonicityEntry(i, "inconclusive", math.nan, math.nan, math.nan,
                                         math.nan, window, "no member inside a half window"))
            continue
        ci, cj = est.values[i], est.values[i + 1]
        uL, lL, uR, lR = ci + rl, ci - rl, cj + rr, cj - rr
        if uL < lR:
            d = "increase"
        elif lL > uR:
            d = "decrease"
        else:
            d = "inconclusive"
        out.append(MonotonicityEntry(i, d, uL, lL, uR, lR, window))
    return out


def significant_jumps(est: Estimate, params: ConfidenceParams) -> list:
    """Assess each change-point with ``m``-cell windows on both sides.

    Windows longer than the adjacent piece are clipped to it; the clip is
    recorded. ``r`` is evaluated by formula on the window itself.
    """
    n = est.n
    m = params.window(n)
    cuts = est.cuts
    out = []
    for i in range(1, len(cuts) - 1):
        a, b, c = cuts[i - 1], cuts[i], cuts[i + 1]
        left = GridInterval(max(a, b - m), b)
        right = GridInterval(b, min(c, b + m))
        rl = r_value(left, params.eta, est.penalty, GridInterval(a, b), n, est.sigma)
        rr = r_value(right, params.eta, est.penalty, GridInterval(b, c), n, est.sigma)
        cl, cr = est.values[i - 1], est.values[i]
        lint, rint = (cl - rl, cl + rl), (cr - rr, cr + rr)
        disjoint = lint[1] < rint[0] or rint[1] < lint[0]
        out.append(JumpAssessment(b / n, b, lint, rint, disjoint, left.cells, right.cells,
                                  left.cells < m or right.cells < m))
    return out


def jump_distance(estimated, truth) -> float:
    """``max_{t in truth} min_{e in estimated} |t - e|`` (one-sided)."""
    truth = np.asarray(list(truth), dtype=float)
    est = np.asarray(list(estimated), dtype=float)
    if truth.size == 0:
        raise ValueError("truth must contain at least one change-point")
    if est.size == 0:
        return math.inf
    return float(np.abs(truth[:, None] - est[None, :]).min(axis=1).max())


def count_modes_troughs(f, include_boundary: bool = False) -> tuple[int, int]:
    """Count strict local maxima (modes) and minima (troughs) of the piece values.

    With ``include_boundary`` the first and last pieces also count when they
    are strictly above/below their single neighbour.
    """
    v = np.asarray(f.values if isinstance(f, StepFunction) else f, dtype=float)
    if v.size < 2:
        return 0, 0
    mid = v[1:-1]
    modes = int(np.sum((mid > v[:-2]) & (mid > v[2:])))
    troughs = int(np.sum((mid < v[:-2]) & (mid < v[2:])))
    if include_boundary:
        modes += int(v[0] > v[1]) + int(v[-1] > v[-2])
        troughs += int(v[0] < v[1]) + int(v[-1] < v[-2])
    return modes, troughs


def _certified_extrema(entries) -> tuple[int, int]:
    dirs = [e.direction for e in entries if e.direction != "inconclusive"]
    modes = sum(1 for p, q in zip(dirs, dirs[1:]) if p == "increase" and q == "decrease")
    troughs = sum(1 for p, q in zip(dirs, dirs[1:]) if p == "decrease" and q == "increase")
    return modes, troughs


def feature_report(est: Estimate, system: IntervalSystem, params: ConfidenceParams) -> FeatureReport:
    mono = monotonicity(est, system, params)
    modes, troughs = _certified_extrema(mono)
    return FeatureReport(
        beta=params.beta,
        eta=params.eta,
        m=params.window(est.n),
        jump_assessments=significant_jumps(est, params),
        monotonicity=mono,
        modes_lower_bound=modes,
        troughs_lower_bound=troughs,
    )
