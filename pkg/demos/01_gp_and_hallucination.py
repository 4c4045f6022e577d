"""Fit a GP to a 1-d function, then watch hallucinated points collapse its variance.

Run with ``python3 demos/01_gp_and_hallucination.py``.
"""

import numpy as np

from easybo.gp import Dataset, fit, hallucinate, predict


def f(x):
    return np.sin(6 * x) + 0.5 * x


rng = np.random.default_rng(0)
X = rng.uniform(size=(7, 1))
model = fit(Dataset(X, f(X[:, 0])), seed=0)
h = model.hyperparams
print(f"fitted length scale {h.length_scales[0]:.3f}, signal variance {h.signal_variance:.3f}, "
      f"noise variance {h.noise_variance:.2e}")

grid = np.linspace(0, 1, 11)[:, None]
mu, sigma = predict(model, grid)

# two evaluations are still running; pretend they returned the posterior mean
pending = np.array([[0.35], [0.8]])
penalized = hallucinate(model, pending)
mu_hat, sigma_hat = predict(penalized, grid)

print("\n    x    mean   sigma  sigma_hat")
for x, m, s, sh in zip(grid[:, 0], mu, sigma, sigma_hat):
    print(f"{x:5.2f} {m:7.3f} {s:7.4f} {sh:9.4f}")

_, s_pend = predict(penalized, pending)
print(f"\nsigma_hat at the pending points: {s_pend}")
print(f"mean unchanged on the grid: {np.allclose(mu, mu_hat)}")
print(f"sigma_hat <= sigma everywhere: {bool(np.all(sigma_hat <= sigma + 1e-12))}")
