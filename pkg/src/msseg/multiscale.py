"""Scale penalties, the multiscale statistic and threshold calibration.

The local test on a member ``I`` inside a constant piece with value ``c`` is

    |sum_{i in I} (y_i - c)| / (sigma * sqrt(len(I))) - s_I,

where ``len(I)`` counts cells. With ``sigma = 1`` this is the raw statistic;
passing the known noise level standardizes the data so that thresholds
calibrated at unit noise apply to any noise level.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from .intervals import GridInterval, IntervalSystem
from .signals import StepFunction, replicate_seed

__all__ = [
    "PENALTIES",
    "penalty_value",
    "penalty_array",
    "multiscale_statistic",
    "members_within",
    "universal_threshold",
    "CalibrationResult",
    "simulate_quantile",
    "null_statistics",
    "Threshold",
]

PENALTIES = ("smuce", "fdrseg", "none")


def penalty_array(kind: str, lengths, n: int, segment_lengths=None) -> np.ndarray:
    """Vectorized ``s_I`` for member lengths (in cells).

    ``segment_lengths`` is the length (in cells) of the constant piece holding
    each member; only fdrseg uses it.
    """
    lengths = np.asarray(lengths, dtype=float)
    if kind == "smuce":
        return np.sqrt(2.0 * np.log(math.e * n / lengths))
    if kind == "fdrseg":
        if segment_lengths is None:
            raise ValueError("fdrseg needs the containing segment lengths")
        seg = np.broadcast_to(np.asarray(segment_lengths, dtype=float), lengths.shape)
        if np.any(seg < lengths):
            raise ValueError("fdrseg: member is not inside its segment")
        return np.sqrt(2.0 * np.log(math.e * seg / lengths))
    if kind == "none":
        return np.zeros_like(lengths)
    raise ValueError(f"unknown penalty {kind!r}")


def penalty_value(kind: str, I: GridInterval, segment: GridInterval | None, n: int) -> float:
    """Scale penalty of member ``I``; ``segment`` is its constant piece (fdrseg)."""
    if I.end > n:
        raise ValueError("interval exceeds the grid")
    if kind == "fdrseg":
        if segment is None or I not in segment:
            raise ValueError("fdrseg: interval must lie inside its segment")
        return float(penalty_array(kind, I.cells, n, segment.cells))
    return float(penalty_array(kind, I.cells, n))


def members_within(system: IntervalSystem, cuts) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Members lying inside one piece of the partition ``cuts``.

    Returns ``(starts, ends, piece_index)``.
    """
    cuts = np.asarray(cuts, dtype=np.int64)
    if system.kind == "full":
        parts = []
        for k, (a, b) in enumerate(zip(cuts[:-1], cuts[1:])):
            s, e = np.triu_indices(int(b - a) + 1, k=1)
            parts.append(np.stack([s + a, e + a, np.full(s.size, k)], axis=1))
        arr = np.concatenate(parts)
        return arr[:, 0], arr[:, 1], arr[:, 2]
    m = system.members()
    piece = np.searchsorted(cuts, m[:, 0], side="right") - 1
    last = np.searchsorted(cuts, m[:, 1] - 1, side="right") - 1
    ok = piece == last
    return m[ok, 0], m[ok, 1], piece[ok]


def multiscale_statistic(y, candidate: StepFunction, system: IntervalSystem,
                         penalty: str, sigma: float = 1.0) -> float:
    """Supremum of penalized local statistics over members where ``candidate`` is flat."""
    y = np.asarray(getattr(y, "y", y), dtype=float)
    n = y.size
    if system.n != n:
        raise ValueError("interval system and data disagree on n")
    cuts = candidate.grid_cuts(n)
    return _statistic_on_partition(y, cuts, np.asarray(candidate.values), system, penalty, sigma)


def _statistic_on_partition(y, cuts, values, system, penalty, sigma=1.0) -> float:
    seg_of_cell = np.repeat(np.arange(len(values)), np.diff(cuts))
    resid = np.concatenate([[0.0], np.cumsum(y - np.asarray(values)[seg_of_cell])])
    if system.kind == "full":
        # by length, so the O(n^2) members are never materialized at once
        best = -math.inf
        n = len(y)
        for a, b in zip(cuts[:-1], cuts[1:]):
            seg = resid[a:b + 1]
            L = int(b - a)
            for w in range(1, L + 1):
                pen = float(penalty_array(penalty, w, n, L))
                loc = np.abs(seg[w:] - seg[:-w]).max() / (sigma * math.sqrt(w)) - pen
                best = max(best, loc)
        return float(best)
    s, e, piece = members_within(system, cuts)
    if s.size == 0:
        return -math.inf
    lengths = e - s
    seg_len = (cuts[1:] - cuts[:-1])[piece]
    pen = penalty_array(penalty, lengths, len(y), seg_len)
    local = np.abs(resid[e] - resid[s]) / (sigma * np.sqrt(lengths)) - pen
    return float(local.max())


def universal_threshold(a: float, n: int) -> float:
    """``a * sqrt(log n)``."""
    if n < 2:
        raise ValueError("universal threshold needs n >= 2")
    if a <= 0:
        raise ValueError("a must be positive")
    return a * math.sqrt(math.log(n))


@dataclass(frozen=True)
class CalibrationResult:
    eta: float
    beta: float
    n_mc: int
    seed: int
    n: int
    system: str
    penalty: str
    sigma: float
    delta_bound: float
    max_penalty: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "CalibrationResult":
        return cls(**json.loads(text))


def _null_batch(noise: np.ndarray, system: IntervalSystem, penalty: str) -> np.ndarray:
    """Null statistic (zero signal, one piece) for each row of ``noise``."""
    n = noise.shape[1]
    csum = np.concatenate([np.zeros((noise.shape[0], 1)), np.cumsum(noise, axis=1)], axis=1)
    if system.kind in ("dyadic-length", "full"):
        out = np.full(noise.shape[0], -np.inf)
        for w in system.member_lengths:
            w = int(w)
            pen = float(penalty_array(penalty, w, n, n))
            loc = np.abs(csum[:, w:] - csum[:, :-w]).max(axis=1) / math.sqrt(w) - pen
            np.maximum(out, loc, out=out)
        return out
    m = system.members()
    lengths = m[:, 1] - m[:, 0]
    pen = penalty_array(penalty, lengths, n, n)
    loc = np.abs(csum[:, m[:, 1]] - csum[:, m[:, 0]]) / np.sqrt(lengths) - pen
    return loc.max(axis=1)


def null_statistics(n: int, system: IntervalSystem, penalty: str, sigma: float,
                    n_mc: int, seed: int, chunk: int = 256) -> np.ndarray:
    """Sorted Monte Carlo draws of the null statistic under Gaussian noise."""
    key = (n, system.kind, penalty, float(sigma), int(n_mc), int(seed))
    if system.kind == "custom":
        return _null_statistics(key, system)
    return _cached_null(key, chunk)


@lru_cache(maxsize=64)
def _cached_null(key, chunk):
    n, kind = key[0], key[1]
    return _null_statistics(key, IntervalSystem(kind, n), chunk)


def _null_statistics(key, system, chunk=256):
    n, _, penalty, sigma, n_mc, seed = key
    draws = np.empty(n_mc)
    for b, start in enumerate(range(0, n_mc, chunk)):
        size = min(chunk, n_mc - start)
        rng = np.random.default_rng(replicate_seed(seed, b))
        noise = sigma * rng.standard_normal((size, n))
        draws[start:start + size] = _null_batch(noise, system, penalty)
    draws.sort()
    draws.setflags(write=False)
    return draws


def simulate_quantile(beta: float, n: int, system: IntervalSystem, penalty: str = "smuce",
                      sigma: float = 1.0, n_mc: int = 10_000, seed: int = 0) -> CalibrationResult:
    """Empirical upper ``beta`` quantile of the null multiscale statistic.

    Returns the ``ceil((1 - beta) * n_mc)``-th order statistic, which never
    undercuts the true quantile on average.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if n_mc < 100:
        raise ValueError("n_mc must be at least 100")
    if system.n != n:
        raise ValueError("interval system does not match n")
    draws = null_statistics(n, system, penalty, sigma, n_mc, seed)
    k = math.ceil(round((1.0 - beta) * n_mc, 9))
    eta = float(draws[max(k, 1) - 1])
    lengths = system.member_lengths
    max_pen = float(np.max(np.abs(penalty_array(penalty, lengths, n, n))))
    delta = max_pen / math.sqrt(math.log(n)) if n >= 2 else math.inf
    return CalibrationResult(eta=eta, beta=beta, n_mc=n_mc, seed=seed, n=n,
                             system=system.kind, penalty=penalty, sigma=sigma,
                             delta_bound=delta, max_penalty=max_pen)


@dataclass(frozen=True)
class Threshold:
    """Threshold rule: ``universal``, ``quantile`` or ``explicit``."""

    rule: str
    a: float | None = None
    beta: float | None = None
    n_mc: int = 10_000
    seed: int = 0
    value: float | None = None

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "Threshold":
        """Parse ``universal:a=X``, ``quantile:beta=X,mc=K`` or ``value:X``."""
        head, _, rest = text.partition(":")
        if head == "value":
            return cls("explicit", value=float(rest))
        opts = dict(kv.split("=", 1) for kv in rest.split(",") if kv)
        if head == "universal":
            return cls("universal", a=float(opts["a"]))
        if head == "quantile":
            return cls("quantile", beta=float(opts["beta"]),
                       n_mc=int(opts.get("mc", 10_000)), seed=int(opts.get("seed", seed)))
        raise ValueError(f"cannot parse threshold {text!r}")

    def resolve(self, n: int, system: IntervalSystem, penalty: str) -> float:
        if self.rule == "explicit":
            return float(self.value)
        if self.rule == "universal":
            return universal_threshold(self.a, n)
        return simulate_quantile(self.beta, n, system, penalty, 1.0, self.n_mc, self.seed).eta
