"""Test signals, exact cell means and noisy observations.

Sampling follows the equidistant design: observation ``i`` carries the cell
mean ``n * int_{[i/n, (i+1)/n)} f`` plus independent sub-Gaussian noise.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np

__all__ = [
    "StepFunction",
    "ContinuousSignal",
    "Observation",
    "NoiseModel",
    "SignalEvaluationError",
    "cell_means",
    "make_olshen_signal",
    "OLSHEN_N",
    "blocks",
    "bumps",
    "heavisine",
    "doppler",
    "ramp",
    "sine_distorted",
    "make_signal",
    "l2_norm",
    "snr_sigma",
    "sample_observations",
    "replicate_seed",
]

OLSHEN_N = 497
_OLSHEN_CPTS = (138, 225, 242, 299, 308, 332)
_OLSHEN_VALUES = (-0.18, 0.08, 1.07, -0.53, 0.16, -0.69, -0.16)

# Donoho-Johnstone constants (WaveLab MakeSignal), unnormalized amplitudes.
_DJ_POS = np.array([0.10, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81])
_BLOCKS_H = np.array([4.0, -5.0, 3.0, -4.0, 5.0, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2])
_BUMPS_H = np.array([4.0, 5.0, 3.0, 4.0, 5.0, 4.2, 2.1, 4.3, 3.1, 5.1, 4.2])
_BUMPS_W = np.array(
    [0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01, 0.005, 0.008, 0.005]
)

_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


class SignalEvaluationError(ValueError):
    """Raised when a signal produces a non-finite value on some cell."""


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function on [0, 1).

    Adjacent equal values are merged on construction, so ``values`` always
    alternate and ``jumps`` is the number of change-points.
    """

    breakpoints: tuple
    values: tuple

    def __init__(self, breakpoints: Sequence[float], values: Sequence[float]):
        bps = [float(b) for b in breakpoints]
        vals = [float(v) for v in values]
        if len(bps) != len(vals) + 1:
            raise ValueError("need exactly one more breakpoint than values")
        if bps[0] != 0.0 or bps[-1] != 1.0:
            raise ValueError("breakpoints must start at 0 and end at 1")
        if any(b >= a for a, b in zip(bps[1:], bps[:-1])):
            raise ValueError("breakpoints must be strictly increasing")
        if not all(np.isfinite(vals)):
            raise ValueError("values must be finite")
        keep_b, keep_v = [bps[0]], [vals[0]]
        for b, v in zip(bps[1:-1], vals[1:]):
            if v == keep_v[-1]:
                continue
            keep_b.append(b)
            keep_v.append(v)
        keep_b.append(1.0)
        object.__setattr__(self, "breakpoints", tuple(keep_b))
        object.__setattr__(self, "values", tuple(keep_v))

    @classmethod
    def constant(cls, value: float) -> "StepFunction":
        return cls((0.0, 1.0), (value,))

    @classmethod
    def from_cells(cls, cells: Sequence[float]) -> "StepFunction":
        """Grid step function taking value ``cells[i]`` on ``[i/n, (i+1)/n)``."""
        cells = np.asarray(cells, dtype=float)
        n = cells.size
        return cls(np.arange(n + 1) / n, cells)

    @classmethod
    def from_partition(cls, cuts: Sequence[int], values: Sequence[float], n: int):
        """Build from integer cut indices ``0 = t_0 < ... < t_k = n``."""
        return cls(np.asarray(cuts, dtype=float) / n, values)

    @property
    def jumps(self) -> int:
        return len(self.breakpoints) - 2

    @property
    def change_points(self) -> tuple:
        return self.breakpoints[1:-1]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breakpoints, x, side="right") - 1
        idx = np.clip(idx, 0, len(self.values) - 1)
        return np.asarray(self.values)[idx]

    def grid_cuts(self, n: int) -> np.ndarray:
        """Breakpoints as integer cell indices; raises if off the grid."""
        scaled = np.asarray(self.breakpoints) * n
        cuts = np.rint(scaled).astype(int)
        if not np.allclose(scaled, cuts, rtol=0, atol=1e-9):
            raise ValueError(f"breakpoints do not lie on the grid of size {n}")
        return cuts

    def shift(self, c: float) -> "StepFunction":
        return StepFunction(self.breakpoints, [v + c for v in self.values])

    def scale(self, lam: float) -> "StepFunction":
        return StepFunction(self.breakpoints, [v * lam for v in self.values])

    def integral(self) -> float:
        return float(np.dot(np.diff(self.breakpoints), self.values))

    def to_dict(self) -> dict:
        return {"breakpoints": list(self.breakpoints), "values": list(self.values)}

    @classmethod
    def from_dict(cls, d: dict) -> "StepFunction":
        return cls(d["breakpoints"], d["values"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "StepFunction":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ContinuousSignal:
    """Pointwise-evaluable bounded signal with known discontinuities.

    ``func`` is vectorized over ``x``. ``discontinuities`` lists the jump
    locations so that quadrature never straddles one. ``step`` is set when the
    signal is itself a step function (Blocks) and then cell means are exact.
    ``sample_term`` is added to cell ``i`` after integration (sine distortion).
    """

    kind: str
    func: Callable[[np.ndarray], np.ndarray]
    params: dict = field(default_factory=dict)
    discontinuities: tuple = ()
    step: StepFunction | None = None
    sample_term: Callable[[np.ndarray], np.ndarray] | None = None
    refine_near_zero: int = 0

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))


Signal = Union[StepFunction, ContinuousSignal]


@dataclass(frozen=True)
class Observation:
    n: int
    y: np.ndarray
    sigma: float = 1.0

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 1 or y.size < 1:
            raise ValueError("y must be a non-empty 1-d sequence")
        if y.size != self.n:
            raise ValueError(f"len(y)={y.size} does not match n={self.n}")
        if not np.all(np.isfinite(y)):
            raise ValueError("y contains non-finite values")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_values(cls, y, sigma: float = 1.0) -> "Observation":
        y = np.asarray(y, dtype=float)
        return cls(y.size, y, sigma)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "value"])
            for i, v in enumerate(self.y):
                w.writerow([i, repr(float(v))])

    @classmethod
    def from_csv(cls, path, sigma: float = 1.0) -> "Observation":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [c.strip() for c in rows[0]] != ["index", "value"]:
            raise ValueError(f"{path}: expected header 'index,value'")
        body = [r for r in rows[1:] if r]
        idx = [int(r[0]) for r in body]
        if idx != list(range(len(body))):
            raise ValueError(f"{path}: indices must run 0..n-1 in order")
        return cls.from_values([float(r[1]) for r in body], sigma)


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "gaussian"
    sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("gaussian", "scaled-rademacher", "uniform"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")

    def draw(self, n: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed & _MASK64)
        if self.kind == "gaussian":
            return self.sigma * rng.standard_normal(n)
        if self.kind == "scaled-rademacher":
            return self.sigma * (2.0 * rng.integers(0, 2, size=n) - 1.0)
        half = self.sigma * np.sqrt(3.0)
        return rng.uniform(-half, half, size=n)


def replicate_seed(base_seed: int, r: int) -> int:
    """Per-replicate seed: ``base XOR (r * golden-ratio constant)`` mod 2**64."""
    return (int(base_seed) ^ ((int(r) * _GOLDEN) & _MASK64)) & _MASK64


# ---------------------------------------------------------------------------
# cell means

_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)


def _gl(func, a: np.ndarray, b: np.ndarray, rows=None) -> np.ndarray:
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    pts = mid[:, None] + half[:, None] * _GL_X[None, :]
    vals = func(pts) if rows is None else func(pts, rows)
    return half * (vals @ _GL_W)


_MAX_ACTIVE = 1 << 21


def _adaptive_integral(func, a, b, tol=1e-10, max_depth=30, pass_rows=False) -> np.ndarray:
    """Vectorized 5-point Gauss-Legendre with bisection where needed.

    With ``pass_rows`` the integrand is called as ``func(x, rows)`` where
    ``rows`` maps each row of ``x`` to its original interval.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.zeros(a.size)
    idx = np.arange(a.size)
    r = (lambda: idx) if pass_rows else (lambda: None)
    whole = _gl(func, a, b, r())
    for _ in range(max_depth):
        m = 0.5 * (a + b)
        left = _gl(func, a, m, r())
        right = _gl(func, m, b, r())
        halves = left + right
        # non-finite rows cannot converge; keep them so the caller can report
        done = (np.abs(halves - whole) <= tol) | ~np.isfinite(halves)
        np.add.at(out, idx[done], halves[done])
        keep = ~done
        if not keep.any():
            return out
        if 2 * keep.sum() > _MAX_ACTIVE:
            np.add.at(out, idx[keep], halves[keep])
            return out
        idx = np.concatenate([idx[keep], idx[keep]])
        whole = np.concatenate([left[keep], right[keep]])
        a, b = np.concatenate([a[keep], m[keep]]), np.concatenate([m[keep], b[keep]])
        # tolerance halves with the interval so the per-cell total stays bounded
        tol = tol / 2
    np.add.at(out, idx, whole)
    return out


def _step_cell_means(f: StepFunction, n: int) -> np.ndarray:
    # cells inside one piece take its value exactly; only cells that
    # straddle a breakpoint need an overlap-weighted average
    bps = np.asarray(f.breakpoints)
    vals = np.asarray(f.values)
    left = np.arange(n) / n
    k = np.clip(np.searchsorted(bps, left, side="right") - 1, 0, len(vals) - 1)
    out = vals[k].astype(float)
    inner = bps[1:-1]
    for i in np.unique(np.floor(inner * n).astype(int)):
        if i >= n or inner[(inner * n > i) & (inner * n < i + 1)].size == 0:
            continue
        a, b = i / n, (i + 1) / n
        cut = np.clip(bps, a, b)
        out[i] = n * float(np.dot(np.diff(cut), vals))
    return out


def _continuous_cell_means(f: ContinuousSignal, n: int) -> np.ndarray:
    edges = np.arange(n + 1) / n
    cuts = [d for d in f.discontinuities if 0.0 < d < 1.0]
    pts = np.unique(np.concatenate([edges, cuts]))
    owner = np.clip(np.searchsorted(edges, pts[:-1], side="right") - 1, 0, n - 1)
    a, b = pts[:-1], pts[1:]
    if f.refine_near_zero:
        # Doppler oscillates without bound near 0: pre-split the first cell
        first = owner == 0
        extra = 2 ** f.refine_near_zero
        sub = np.linspace(0.0, 1.0, extra + 1)
        a0 = (a[first][:, None] + (b - a)[first][:, None] * sub[None, :-1]).ravel()
        b0 = (a[first][:, None] + (b - a)[first][:, None] * sub[None, 1:]).ravel()
        o0 = np.repeat(owner[first], extra)
        a = np.concatenate([a0, a[~first]])
        b = np.concatenate([b0, b[~first]])
        owner = np.concatenate([o0, owner[~first]])
    with np.errstate(all="ignore"):
        pieces = _adaptive_integral(f.func, a, b)
    means = n * np.bincount(owner, weights=pieces, minlength=n)
    bad = np.flatnonzero(~np.isfinite(means))
    if bad.size:
        raise SignalEvaluationError(
            f"{f.kind}: non-finite value on cell {bad[0]} "
            f"[{bad[0]}/{n}, {bad[0] + 1}/{n})"
        )
    return means


def cell_means(f: Signal, n: int) -> np.ndarray:
    """Cell averages ``n * int_{[i/n,(i+1)/n)} f``, i = 0..n-1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(f, StepFunction):
        return _step_cell_means(f, n)
    base = _step_cell_means(f.step, n) if f.step is not None else _continuous_cell_means(f, n)
    if f.sample_term is not None:
        base = base + f.sample_term(np.arange(n))
    return base


# ---------------------------------------------------------------------------
# signal catalogue

def make_olshen_signal() -> StepFunction:
    """Six-jump copy-number style signal, designed for ``n = OLSHEN_N``."""
    bps = (0,) + _OLSHEN_CPTS + (OLSHEN_N,)
    return StepFunction(np.asarray(bps, dtype=float) / OLSHEN_N, _OLSHEN_VALUES)


def _blocks_step() -> StepFunction:
    levels = np.cumsum(_BLOCKS_H)
    return StepFunction(np.concatenate([[0.0], _DJ_POS, [1.0]]), np.concatenate([[0.0], levels]))


def blocks() -> ContinuousSignal:
    step = _blocks_step()
    return ContinuousSignal("blocks", step, discontinuities=tuple(_DJ_POS), step=step)


def _bumps(x):
    k = np.abs((x[..., None] - _DJ_POS) / _BUMPS_W)
    return ((1.0 + k) ** -4 @ _BUMPS_H)


def bumps() -> ContinuousSignal:
    return ContinuousSignal("bumps", _bumps)


def _heavisine(x):
    return 4.0 * np.sin(4 * np.pi * x) - np.sign(x - 0.3) - np.sign(0.72 - x)


def heavisine() -> ContinuousSignal:
    return ContinuousSignal("heavisine", _heavisine, discontinuities=(0.3, 0.72))


def _doppler(x):
    return np.sqrt(x * (1 - x)) * np.sin(2 * np.pi * 1.05 / (x + 0.05))


def doppler() -> ContinuousSignal:
    return ContinuousSignal("doppler", _doppler, refine_near_zero=4)


def ramp() -> ContinuousSignal:
    """f(x) = x."""
    return ContinuousSignal("ramp", lambda x: x)


def sine_distorted(base: StepFunction, b: float, a: float = 0.025) -> ContinuousSignal:
    """Step signal plus ``0.25 b sin(a pi i)`` added at sample index ``i``."""
    amp = 0.25 * b
    return ContinuousSignal(
        "sine-distorted-step",
        base,
        params={"b": b, "a": a},
        discontinuities=base.change_points,
        step=base,
        sample_term=lambda i: amp * np.sin(a * np.pi * i),
    )


def make_signal(name: str, **params) -> Signal:
    """Look up a signal by name (used by the CLI and config files)."""
    name = name.lower()
    if name == "olshen":
        return make_olshen_signal()
    if name == "olshen-sine":
        return sine_distorted(make_olshen_signal(), b=float(params.get("b", 0.3)),
                              a=float(params.get("a", 0.025)))
    table = {"blocks": blocks, "bumps": bumps, "heavisine": heavisine,
             "doppler": doppler, "ramp": ramp}
    if name not in table:
        raise ValueError(f"unknown signal {name!r}")
    return table[name]()


def l2_norm(f: Signal, n: int) -> float:
    """Discrete L2 norm ``sqrt(mean(cell_means**2))`` at sample size ``n``."""
    return float(np.sqrt(np.mean(cell_means(f, n) ** 2)))


def snr_sigma(f: Signal, target_snr: float, n: int) -> float:
    """Noise scale giving ``||f||_L2 / sigma = target_snr`` at sample size ``n``."""
    if target_snr <= 0:
        raise ValueError("target_snr must be positive")
    norm = l2_norm(f, n)
    if norm == 0.0:
        raise ValueError("signal has zero L2 norm")
    return norm / target_snr


def sample_observations(f: Signal, n: int, noise: NoiseModel) -> Observation:
    if n < 1:
        raise ValueError("n must be >= 1")
    y = cell_means(f, n) + noise.draw(n)
    return Observation(n, y, noise.sigma)
