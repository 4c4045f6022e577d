"""The randomized exploration weight: how often each trade-off gets picked.

``w = kappa / (kappa + 1)`` with ``kappa`` uniform on ``[0, lam]`` puts most
mass near exploitation, with a heavy tail towards exploration.
"""

import numpy as np

from easybo.acquisition import sample_weight, weight_cdf, weight_mean

lam = 6.0
w = sample_weight(lam, np.random.default_rng(1), size=1_000_000)
print(f"support [0, {lam / (lam + 1):.4f}], sample mean {w.mean():.4f}, exact mean {weight_mean(lam):.4f}")

edges = np.linspace(0, lam / (lam + 1), 7)
counts, _ = np.histogram(w, edges)
expected = np.diff(weight_cdf(edges, lam))
print("\n   bin            empirical  exact")
for lo, hi, c, e in zip(edges, edges[1:], counts / w.size, expected):
    print(f"[{lo:.3f}, {hi:.3f})   {c:9.4f}  {e:.4f}")

for lam in (1.0, 6.0, 20.0):
    print(f"lam={lam:5.1f}: mean weight {weight_mean(lam):.3f}")
