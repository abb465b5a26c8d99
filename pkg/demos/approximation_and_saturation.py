"""
Best k-jump approximants and the n^(-2/3) floor
===============================================

The error of the best step approximant with k jumps decays like k^(-1) for
the ramp f(x) = x. Even with the ideal equal partition, the risk of a
piecewise-constant fit of the ramp cannot beat order n^(-2/3).
"""
import numpy as np

from msseg import approx_error_curve, equal_partition, heavisine, oracle_risk, ramp

for name, f in (("ramp", ramp()), ("heavisine", heavisine())):
    curve = approx_error_curve(f, 2048, 64)
    print(f"{name:10s} log-log slope over k in [4, 64]: {curve.slope:.3f}")

# squared bias 1/(12 m^2) against variance m/n over equal partitions
for n in (48, 384, 3072):
    ms = [m for m in range(1, n + 1) if n % m == 0]
    risks = np.array([oracle_risk(ramp(), equal_partition(m), 1.0, n).total for m in ms])
    best = int(np.argmin(risks))
    print(f"n={n:5d}: best m = {ms[best]:3d}, risk = {risks[best]:.6f}, "
          f"risk * n^(2/3) = {risks[best] * n ** (2 / 3):.4f}")

# at n = 6 m^3 the minimum is 6^(2/3)/4 n^(-2/3)
print(f"6^(2/3)/4 = {6 ** (2 / 3) / 4:.4f}")
