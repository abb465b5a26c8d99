"""Experiment drivers: stability, noise sweeps, robustness and convergence.

Every driver takes an :class:`ExperimentConfig` and returns an
:class:`ExperimentResult` with one record per replicate and one aggregate row
per ``(n, snr, beta, b)`` group. Replicate ``r`` always draws its noise from
``replicate_seed(seed, r)``, so the same noise is reused across the beta and
SNR grids (common random numbers).

Thresholds are calibrated at unit noise and the fit standardizes by the known
``sigma``; see :mod:`msseg.multiscale`.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .inference import count_modes_troughs, jump_distance
from .intervals import IntervalSystem
from .multiscale import PENALTIES, simulate_quantile
from .oracle import loglog_slope, lp_loss
from .signals import (NoiseModel, StepFunction, cell_means, make_olshen_signal, make_signal,
                      replicate_seed, sample_observations, sine_distorted, snr_sigma)
from .solver import fit

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "run_experiment",
    "run_stability",
    "run_noise_sweep",
    "run_robustness",
    "run_convergence",
    "emit",
    "build_system",
    "calibrated_eta",
    "FULL_SYSTEM_MAX_N",
]

EXPERIMENTS = ("stability", "noise-sweep", "robustness", "convergence",
               "calibrate", "fit", "features", "oracle")
SYSTEMS = ("full", "dyadic-partition", "dyadic-length")
NOISE_KINDS = ("gaussian", "scaled-rademacher", "uniform")
FULL_SYSTEM_MAX_N = 2000

CSV_COLUMNS = ("replicate", "n", "snr", "beta", "b", "seed", "jumps", "l2_loss",
               "jump_distance", "modes", "troughs")


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


def _tuple(v, cast):
    if isinstance(v, str):
        v = [s for s in v.replace(" ", "").split(",") if s]
    elif not isinstance(v, (list, tuple)):
        v = [v]
    return tuple(cast(x) for x in v)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "stability"
    signal: str = "olshen"
    n: tuple = (497,)
    snr: tuple = (1.0,)
    beta: tuple = (0.1,)
    b: tuple = (0.0,)
    a: float = 0.025
    penalty: str = "smuce"
    intervals: str = "dyadic-length"
    replicates: int = 100
    seed: int = 0
    n_mc: int = 10_000
    noise: str = "gaussian"
    lp: tuple = ()
    output: str = ""

    def __post_init__(self):
        for name, cast in (("n", int), ("snr", float), ("beta", float), ("b", float),
                           ("lp", float)):
            object.__setattr__(self, name, _tuple(getattr(self, name), cast))
        self.validate()

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.penalty not in PENALTIES:
            raise ConfigError(f"unknown penalty {self.penalty!r}")
        if self.intervals not in SYSTEMS:
            raise ConfigError(f"unknown interval system {self.intervals!r}")
        if self.noise not in NOISE_KINDS:
            raise ConfigError(f"unknown noise kind {self.noise!r}")
        for name in ("n", "snr", "beta", "b"):
            if not getattr(self, name):
                raise ConfigError(f"grid {name!r} is empty")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if any(n < 2 for n in self.n):
            raise ConfigError("n must be >= 2")
        if any(s <= 0 for s in self.snr):
            raise ConfigError("snr must be positive")
        if any(not 0 < x < 1 for x in self.beta):
            raise ConfigError("beta must lie in (0, 1)")
        if any(p <= 0 for p in self.lp):
            raise ConfigError("lp exponents must be positive")
        if self.n_mc < 100:
            raise ConfigError("n_mc must be at least 100")
        if self.intervals == "full" and max(self.n) > FULL_SYSTEM_MAX_N:
            raise ConfigError(f"full interval system is limited to n <= {FULL_SYSTEM_MAX_N}")

    # flat key=value manifest
    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, **overrides) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        kw = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            k = k.replace("-", "_")
            if k not in known:
                raise ConfigError(f"line {lineno}: unknown key {k!r}")
            kw[k] = v
        kw.update({k: v for k, v in overrides.items() if v is not None})
        for k in ("replicates", "seed", "n_mc"):
            if k in kw:
                kw[k] = int(kw[k])
        if "a" in kw:
            kw["a"] = float(kw["a"])
        try:
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from exc
        return cls.from_text(text, **overrides)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list = field(default_factory=list)
    aggregates: list = field(default_factory=list)
    slope: float | None = None
    slope_stderr: float | None = None

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "records": self.records,
            "aggregates": self.aggregates,
            "slope": self.slope,
            "slope_stderr": self.slope_stderr,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentResult":
        d = json.loads(text)
        return cls(ExperimentConfig(**d["config"]), d["records"], d["aggregates"],
                   d["slope"], d["slope_stderr"])


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("MSSEG_THREADS", "1")))
    except ValueError:
        return 1


def build_system(kind: str, n: int) -> IntervalSystem:
    if kind == "full" and n > FULL_SYSTEM_MAX_N:
        raise ConfigError(f"full interval system is limited to n <= {FULL_SYSTEM_MAX_N}")
    return IntervalSystem(kind, n)


def calibrated_eta(n, beta, cfg: ExperimentConfig) -> float:
    return simulate_quantile(beta, n, build_system(cfg.intervals, n), cfg.penalty, 1.0,
                             cfg.n_mc, cfg.seed).eta


def _mean_se(vals):
    v = np.asarray(vals, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return math.nan, math.nan
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan
    return float(v.mean()), se


def _aggregate(records) -> list:
    groups = {}
    for r in records:
        groups.setdefault((r["n"], r["snr"], r["beta"], r["b"]), []).append(r)
    out = []
    for (n, snr, beta, b), rows in groups.items():
        row = {"n": n, "snr": snr, "beta": beta, "b": b, "replicates": len(rows)}
        for key in ("jumps", "l2_loss", "jump_distance"):
            row[f"{key}_mean"], row[f"{key}_stderr"] = _mean_se([x[key] for x in rows])
        for key in rows[0]["lp_losses"]:
            row[f"lp{key}_mean"], row[f"lp{key}_stderr"] = _mean_se(
                [x["lp_losses"][key] for x in rows])
        out.append(row)
    return out


def _loss(truth, est, n, p=2.0) -> float:
    """L^p loss in the continuum, or on the cell grid for sample-indexed truths."""
    sample_indexed = getattr(truth, "sample_term", None) is not None
    if not sample_indexed:
        return lp_loss(truth, est.fit, p)
    d = cell_means(truth, n) - cell_means(est.fit, n)
    return float(np.mean(np.abs(d) ** p) ** (1.0 / p))


def _true_change_points(truth):
    if isinstance(truth, StepFunction):
        return truth.change_points
    if getattr(truth, "step", None) is not None:
        return truth.step.change_points
    return ()


def _replicate(truth, n, sigma, r, beta, eta, cfg, snr, b, system):
    seed = replicate_seed(cfg.seed, r)
    obs = sample_observations(truth, n, NoiseModel(cfg.noise, sigma, seed))
    t0 = time.perf_counter()
    est = fit(obs.y, system, cfg.penalty, eta, sigma=sigma)
    runtime = (time.perf_counter() - t0) * 1e3
    cps = _true_change_points(truth)
    jd = jump_distance(est.change_points, cps) if cps else math.nan
    modes, troughs = count_modes_troughs(est.fit)
    return {
        "replicate": r, "n": n, "snr": snr, "beta": beta, "b": b, "seed": seed,
        "jumps": est.jumps,
        "l2_loss": _loss(truth, est, n),
        "lp_losses": {repr(p): _loss(truth, est, n, p) for p in cfg.lp},
        "jump_distance": jd,
        "modes": modes, "troughs": troughs,
        "runtime_ms": runtime,
    }


def _run_grid(cfg, jobs) -> list:
    """``jobs``: list of ``(truth, n, sigma, beta, snr, b)``; replicates are expanded here."""
    tasks = []
    for truth, n, sigma, beta, snr, b in jobs:
        system = build_system(cfg.intervals, n)
        eta = calibrated_eta(n, beta, cfg)
        for r in range(cfg.replicates):
            tasks.append((truth, n, sigma, r, beta, eta, cfg, snr, b, system))
    threads = _threads()
    if threads == 1:
        return [_replicate(*t) for t in tasks]
    with ThreadPoolExecutor(threads) as ex:
        return list(ex.map(lambda t: _replicate(*t), tasks))


def _finish(cfg, records, slope_x=None) -> ExperimentResult:
    res = ExperimentResult(cfg, records, _aggregate(records))
    if slope_x is not None:
        ys = [row["l2_loss_mean"] for row in res.aggregates]
        xs = [row[slope_x] for row in res.aggregates]
        if len(set(xs)) >= 2:
            res.slope, res.slope_stderr = loglog_slope(xs, ys)
    return res


def run_stability(cfg: ExperimentConfig) -> ExperimentResult:
    """Jump counts and jump distances across the beta grid for a step truth."""
    truth = make_signal(cfg.signal)
    if not isinstance(truth, StepFunction):
        raise ConfigError("stability needs a step-function truth")
    jobs = []
    for n in cfg.n:
        for snr in cfg.snr:
            sigma = snr_sigma(truth, snr, n)
            jobs += [(truth, n, sigma, beta, snr, 0.0) for beta in cfg.beta]
    return _finish(cfg, _run_grid(cfg, jobs))


def run_noise_sweep(cfg: ExperimentConfig) -> ExperimentResult:
    """Same metrics as the convergence study, swept over the SNR grid."""
    truth = make_signal(cfg.signal)
    jobs = []
    for n in cfg.n:
        for snr in cfg.snr:
            sigma = snr_sigma(truth, snr, n)
            jobs += [(truth, n, sigma, beta, snr, 0.0) for beta in cfg.beta]
    return _finish(cfg, _run_grid(cfg, jobs))


def run_robustness(cfg: ExperimentConfig) -> ExperimentResult:
    """Sine-distorted step truth over the ``b`` grid.

    The noise level is set from the undistorted base so that every ``b``
    shares the same noise, and ``b = 0`` is the base step itself.
    """
    base = make_olshen_signal() if cfg.signal in ("olshen", "olshen-sine") else make_signal(cfg.signal)
    if not isinstance(base, StepFunction):
        raise ConfigError("robustness needs a step-function base signal")
    jobs = []
    for n in cfg.n:
        for snr in cfg.snr:
            sigma = snr_sigma(base, snr, n)
            for b in cfg.b:
                truth = base if b == 0 else sine_distorted(base, b, cfg.a)
                jobs += [(truth, n, sigma, beta, snr, b) for beta in cfg.beta]
    return _finish(cfg, _run_grid(cfg, jobs))


def run_convergence(cfg: ExperimentConfig) -> ExperimentResult:
    """Mean L2 loss per ``n`` and its log-log slope in ``n``."""
    if len(cfg.snr) != 1 or len(cfg.beta) != 1:
        raise ConfigError("convergence takes a single snr and a single beta")
    truth = make_signal(cfg.signal)
    snr, beta = cfg.snr[0], cfg.beta[0]
    jobs = [(truth, n, snr_sigma(truth, snr, n), beta, snr, 0.0) for n in cfg.n]
    return _finish(cfg, _run_grid(cfg, jobs), slope_x="n")


_DRIVERS = {
    "stability": run_stability,
    "noise-sweep": run_noise_sweep,
    "robustness": run_robustness,
    "convergence": run_convergence,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    if cfg.experiment not in _DRIVERS:
        raise ConfigError(f"{cfg.experiment!r} is not a replicate experiment")
    return _DRIVERS[cfg.experiment](cfg)


def _csv_text(result: ExperimentResult) -> str:
    lp_keys = [repr(p) for p in result.config.lp]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(CSV_COLUMNS) + [f"lp{k}_loss" for k in lp_keys])
    for r in result.records:
        w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in CSV_COLUMNS]
                   + [repr(r["lp_losses"][k]) for k in lp_keys])
    return buf.getvalue()


def _gnuplot_text(result: ExperimentResult) -> str:
    cols = ["n", "snr", "beta", "b", "replicates", "jumps_mean", "jumps_stderr",
            "l2_loss_mean", "l2_loss_stderr", "jump_distance_mean", "jump_distance_stderr"]
    lines = ["# " + " ".join(cols)]
    if result.slope is not None:
        lines.append(f"# slope {result.slope!r} stderr {result.slope_stderr!r}")
    for row in result.aggregates:
        lines.append(" ".join(f"{row[c]:.12g}" for c in cols))
    return "\n".join(lines) + "\n"


def emit(result: ExperimentResult, fmt: str, path=None) -> str:
    """Render ``result`` as csv, json or gnuplot; write to ``path`` when given.

    The csv holds per-replicate rows and leaves out wall-clock runtime so
    that equal configurations give byte-identical files.
    """
    render = {"csv": _csv_text, "json": lambda r: r.to_json() + "\n",
              "gnuplot": _gnuplot_text}
    if fmt not in render:
        raise ConfigError(f"unknown output format {fmt!r}")
    text = render[fmt](result)
    if path:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return text


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
