"""
Empirical convergence rates
===========================

Mean L2 loss of the estimator over a doubling grid of sample sizes, for the
Blocks step signal and the smooth-with-jumps Heavisine. Pass ``full`` to
run the 1023..8184 grid with 20 replicates (a few minutes).
"""
import sys

from msseg import ExperimentConfig, emit, run_convergence

full = len(sys.argv) > 1 and sys.argv[1] == "full"
grid = (1023, 2046, 4092, 8184) if full else (511, 1022, 2044)
reps = 20 if full else 5

for signal in ("blocks", "heavisine"):
    cfg = ExperimentConfig(experiment="convergence", signal=signal, n=grid, snr=(2.5,),
                           replicates=reps, n_mc=10_000 if full else 2000)
    res = run_convergence(cfg)
    print(f"{signal}: slope {res.slope:.3f} +- {res.slope_stderr:.3f}")
    print(emit(res, "gnuplot"))

# Blocks is a step function: expect a slope near -1/2.
# Heavisine behaves like a smooth function: expect a slope near -1/3.
