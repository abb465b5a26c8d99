"""``msseg`` command line interface.

Exit codes: 0 success, 2 invalid configuration or input, 3 infeasible fit.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import harness
from .harness import ConfigError, ExperimentConfig
from .inference import ConfidenceParams, feature_report
from .multiscale import PENALTIES, Threshold, simulate_quantile
from .oracle import approx_error_curve, equal_partition, oracle_risk
from .signals import Observation, make_signal
from .solver import Estimate, InfeasibleError, fit

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 2, 3


def _write(text: str, path) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _common(p, experiment=False):
    p.add_argument("--intervals", choices=harness.SYSTEMS, default=None if experiment else "dyadic-length")
    p.add_argument("--penalty", choices=PENALTIES, default=None if experiment else "smuce")
    p.add_argument("--seed", type=int, default=None if experiment else 0)
    p.add_argument("--output", "-o", default=None)


def cmd_calibrate(args) -> int:
    system = harness.build_system(args.intervals, args.n)
    res = simulate_quantile(args.beta, args.n, system, args.penalty, args.sigma, args.mc, args.seed)
    _write(res.to_json() + "\n", args.output)
    return EXIT_OK


def cmd_fit(args) -> int:
    obs = Observation.from_csv(args.input, sigma=args.sigma)
    system = harness.build_system(args.intervals, obs.n)
    rule = Threshold.parse(args.threshold, seed=args.seed)
    eta = rule.resolve(obs.n, system, args.penalty)
    est = fit(obs.y, system, args.penalty, eta, sigma=args.sigma)
    est.meta.update({"threshold": args.threshold})
    if rule.rule == "quantile":
        est.meta["beta"] = rule.beta
    _write(est.to_json() + "\n", args.output)
    return EXIT_OK


def cmd_features(args) -> int:
    est = Estimate.from_json(Path(args.estimate).read_text())
    system = harness.build_system(est.system, est.n)
    m = None if args.m == "auto" else int(args.m)
    eta = est.eta if args.eta is None else args.eta
    report = feature_report(est, system, ConfidenceParams(args.beta, eta, m))
    _write(report.to_json() + "\n", args.output)
    if args.table:
        Path(args.table).write_text(report.annotation_table())
    return EXIT_OK


def cmd_oracle(args) -> int:
    curve = approx_error_curve(make_signal(args.signal), args.n, args.curve, k_min=args.k_min)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "delta", "gamma_hat"])
    g = "" if curve.gamma_hat is None else repr(curve.gamma_hat)
    for k, e in zip(curve.ks, curve.errors):
        w.writerow([int(k), repr(float(e)), g])
    _write(buf.getvalue(), args.output)
    return EXIT_OK


def _partition(text: str, n: int):
    if text.startswith("equal:"):
        opts = dict(kv.split("=", 1) for kv in text[6:].split(","))
        return equal_partition(int(opts["m"]))
    return np.asarray([float(x) for x in text.split(",")])


def cmd_oracle_risk(args) -> int:
    f = make_signal(args.signal)
    r = oracle_risk(f, _partition(args.partition, args.n), args.sigma, args.n)
    lines = ["# segments bias_sq discrete_bias_sq variance total",
             f"{len(r.tau) - 1} {r.bias_sq!r} {r.discrete_bias_sq!r} {r.variance!r} {r.total!r}"]
    _write("\n".join(lines) + "\n", args.output)
    return EXIT_OK


def cmd_experiment(args) -> int:
    overrides = {k: getattr(args, k) for k in
                 ("signal", "n", "snr", "beta", "b", "replicates", "seed", "n_mc",
                  "penalty", "intervals", "noise", "lp", "output")}
    overrides["experiment"] = args.command
    if args.config:
        cfg = ExperimentConfig.from_file(args.config, **overrides)
    else:
        cfg = ExperimentConfig.from_text("", **overrides)
    result = harness.run_experiment(cfg)
    text = harness.emit(result, args.format, cfg.output or None)
    if not cfg.output:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="msseg", description="Multiscale change-point segmentation")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="Monte Carlo threshold eta(beta)")
    _common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--mc", type=int, default=10_000)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("fit", help="fit a step function to index,value CSV data")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--threshold", default="quantile:beta=0.1,mc=10000")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("features", help="significant jumps and monotonicity")
    p.add_argument("--estimate", required=True)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--eta", type=float, default=None, help="defaults to the estimate's eta")
    p.add_argument("--m", default="auto")
    p.add_argument("--table", default=None, help="write a plot annotation table here")
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("oracle", help="best k-jump approximation error curve")
    p.add_argument("--signal", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--curve", type=int, default=64)
    p.add_argument("--k-min", type=int, default=4)
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("oracle-risk", help="risk of the oracle segmentation on a partition")
    p.add_argument("--signal", required=True)
    p.add_argument("--partition", required=True, help="equal:m=<k> or comma-separated breakpoints")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--output", "-o", default=None)
    p.set_defaults(func=cmd_oracle_risk)

    for name in ("stability", "noise-sweep", "robustness", "convergence"):
        p = sub.add_parser(name, help=f"run the {name} experiment")
        _common(p, experiment=True)
        p.add_argument("--config", default=None, help="flat key=value manifest")
        p.add_argument("--signal", default=None)
        p.add_argument("--n", default=None)
        p.add_argument("--snr", default=None)
        p.add_argument("--beta", default=None)
        p.add_argument("--b", default=None)
        p.add_argument("--replicates", type=int, default=None)
        p.add_argument("--n-mc", dest="n_mc", type=int, default=None)
        p.add_argument("--noise", default=None)
        p.add_argument("--lp", default=None)
        p.add_argument("--format", choices=("csv", "json", "gnuplot"), default="csv")
        p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"msseg: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"msseg: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
