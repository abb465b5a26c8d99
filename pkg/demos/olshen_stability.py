"""
Jump counts on the Olshen copy-number signal
============================================

A step signal with six change-points, two of them bounding short segments,
observed at n = 497 with SNR 1. We fit the multiscale estimator at several
significance levels and look at how many jumps it keeps.
"""
import sys
from collections import Counter

from msseg import (ExperimentConfig, IntervalSystem, NoiseModel, fit, make_olshen_signal,
                   run_stability, sample_observations, simulate_quantile, snr_sigma)

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 50

f = make_olshen_signal()
n = 497
sigma = snr_sigma(f, 1.0, n)
print(f"true change-points: {[round(t * n) for t in f.change_points]}, sigma = {sigma:.4f}")

# one data set, one threshold
system = IntervalSystem("dyadic-length", n)
eta = simulate_quantile(0.1, n, system, "smuce", n_mc=10_000, seed=0).eta
obs = sample_observations(f, n, NoiseModel("gaussian", sigma, seed=1))
est = fit(obs.y, system, "smuce", eta, sigma=sigma)
print(f"eta(0.1) = {eta:.3f}; fitted cuts {est.cuts[1:-1]}, certificate {est.certificate:.3f}")

# the same noise draws are reused for every beta
cfg = ExperimentConfig(signal="olshen", beta=(0.01, 0.1, 0.3, 0.5, 0.9), replicates=reps)
res = run_stability(cfg)
for beta in cfg.beta:
    counts = Counter(r["jumps"] for r in res.records if r["beta"] == beta)
    print(f"beta={beta:<5} jump counts {dict(sorted(counts.items()))}")

# smaller beta means a larger threshold and never more jumps on the same data
