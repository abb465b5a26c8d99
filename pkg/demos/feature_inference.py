"""
Which jumps are real?
=====================

Three jumps on n = 1000 points at SNR 5: a unit step at 1/4 and two larger
ones at 1/2 and 3/4. Each estimated jump gets a simultaneous confidence
statement, and adjacent pieces get a certified increase or decrease.
"""
from msseg import (ConfidenceParams, IntervalSystem, NoiseModel, StepFunction, feature_report,
                   fit, sample_observations, simulate_quantile, snr_sigma)

n = 1000
f = StepFunction((0, 0.25, 0.5, 0.75, 1), (0.0, -1.0, 1.3, -0.8))
sigma = snr_sigma(f, 5.0, n)
system = IntervalSystem("dyadic-length", n)
eta = simulate_quantile(0.1, n, system, "smuce", n_mc=10_000, seed=0).eta

obs = sample_observations(f, n, NoiseModel("gaussian", sigma, seed=3))
est = fit(obs.y, system, "smuce", eta, sigma=sigma)
report = feature_report(est, system, ConfidenceParams(0.1, eta))

print(f"sigma = {sigma:.4f}, eta = {eta:.3f}, window m = {report.m}")
for a in report.jump_assessments:
    print(f"jump at {a.location:.3f}: left {a.left[0]:+.2f}..{a.left[1]:+.2f}, "
          f"right {a.right[0]:+.2f}..{a.right[1]:+.2f}, significant={a.significant}")

# a gnuplot-ready table for annotating a plot of the fit
print(report.annotation_table())
