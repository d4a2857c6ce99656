"""Cross-check the information recursion against the Kalman filter.

For a scalar linear-Gaussian system with known gains the inverse of the
state information block must reproduce the Kalman filter's posterior
variance exactly, step for step.

Run:  python3 demos/kalman_crosscheck.py
"""

import numpy as np

from pcrlbench import build_model, run_pcrlb
from pcrlbench.kalman import kalman_filter_1d

a, c, q_var, r_var = 0.8, 1.0, 0.1, 0.1
model = build_model("linear-gaussian-1d", {"a": a, "c": c, "q_var": q_var, "r_var": r_var})

result = run_pcrlb(model, mc_count=25, horizon=40, seed=1)
ys = result.ensemble.measurements[0, :, 0]
_, kf_var = kalman_filter_1d(a, c, q_var, r_var, 0.0, 1.0, ys)
recursion_var = np.array([1.0 / p.jx[0, 0] for p in result.pims])

print(f"{'t':>3}  {'kalman var':>12}  {'1/J_x':>12}  {'rel err':>10}")
for t in range(0, 41, 5):
    rel = abs(recursion_var[t] - kf_var[t]) / kf_var[t]
    print(f"{t:>3}  {kf_var[t]:12.8f}  {recursion_var[t]:12.8f}  {rel:10.2e}")

print("\nmax relative error:", np.abs(recursion_var - kf_var).max() / kf_var.min())
