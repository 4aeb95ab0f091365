"""
How much does averaging k forecasters help?
===========================================

The mean of k errors with variance v and pairwise covariance c has
second moment v/k + (k-1)c/k.  Independent errors shrink by 1/k;
perfectly correlated ones do not shrink at all.
"""

import numpy as np

from danet.ensemble import variance_diagnostics

rng = np.random.default_rng(0)

# %%
# Independent unit-variance errors, five members
d = variance_diagnostics(rng.normal(size=(5, 100_000)))
print(f"independent: v={d.v:.3f} c={d.c:.4f} predicted={d.predicted_mse:.4f} observed={d.observed_mse:.4f}")

# %%
# Shared component: each member error = common part + private part
for rho in (0.0, 0.25, 0.5, 0.9):
    common = rng.normal(size=100_000)
    e = np.sqrt(rho) * common + np.sqrt(1 - rho) * rng.normal(size=(5, 100_000))
    d = variance_diagnostics(e)
    print(f"rho={rho:.2f}: c={d.c:.3f} ensemble mse={d.observed_mse:.3f}")
