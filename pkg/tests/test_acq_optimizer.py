import numpy as np
import pytest

from easybo.acq_optimizer import (
    AcquisitionOptimizationError,
    InnerOptConfig,
    maximize_acq,
    pattern_directions,
    sobol_points,
)
from easybo.acquisition import acq_ucb
from easybo.gp import BoxDomain, Dataset, fit


class Counting:
    def __init__(self, f):
        self.f = f
        self.n = 0
        self.values = []

    def __call__(self, Q):
        self.n += len(Q)
        v = self.f(Q)
        self.values.append(v)
        return v


def test_constant_function_returns_domain_point():
    dom = BoxDomain.unit(3)
    x = maximize_acq(lambda Q: np.full(len(Q), 4.2), dom, InnerOptConfig(n_random=64))
    assert x.shape == (3,)
    assert np.all((x >= 0) & (x <= 1))


def test_quadratic_maximizer():
    c = np.array([0.31, 0.77, 0.52])
    x = maximize_acq(lambda Q: -((Q - c) ** 2).sum(1), BoxDomain.unit(3))
    assert np.linalg.norm(x - c) < 1e-3


def test_maximizer_on_boundary_stays_in_cube():
    c = np.array([1.3, -0.2])
    x = maximize_acq(lambda Q: -((Q - c) ** 2).sum(1), BoxDomain.unit(2))
    np.testing.assert_allclose(x, [1.0, 0.0], atol=1e-6)


def test_ucb_maximum_matches_dense_grid():
    rng = np.random.default_rng(2)
    X = rng.uniform(size=(8, 1))
    model = fit(Dataset(X, np.sin(6 * X[:, 0]) + 0.1 * rng.normal(size=8)), seed=0)
    grid = np.linspace(0, 1, 100_000)[:, None]
    best_grid = acq_ucb(model, grid, 2.0).max()
    x = maximize_acq(lambda Q: acq_ucb(model, Q, 2.0), BoxDomain.unit(1))
    assert acq_ucb(model, x, 2.0) >= best_grid - 1e-6


def test_evaluation_budget():
    cfg = InnerOptConfig(n_random=128, n_local_starts=4, local_max_iters=20)
    f = Counting(lambda Q: -((Q - 0.5) ** 2).sum(1))
    maximize_acq(f, BoxDomain.unit(5), cfg)
    assert f.n <= 128 + 4 * 20 * (5 + 1)


def test_result_not_worse_than_screening():
    rng = np.random.default_rng(0)
    centers = rng.uniform(size=(6, 4))

    def bumpy(Q):
        return np.exp(-20 * ((Q[:, None, :] - centers) ** 2).sum(-1)).max(1)

    f = Counting(bumpy)
    x = maximize_acq(f, BoxDomain.unit(4), InnerOptConfig(n_random=256))
    assert bumpy(x[None])[0] >= f.values[0].max()


def test_deterministic_under_seed():
    def f(Q):
        return np.sin(7 * Q).sum(1)

    cfg = InnerOptConfig(seed=5)
    a = maximize_acq(f, BoxDomain.unit(3), cfg)
    b = maximize_acq(f, BoxDomain.unit(3), cfg)
    np.testing.assert_array_equal(a, b)


def test_ties_prefer_first_screening_point():
    cfg = InnerOptConfig(n_random=32, n_local_starts=3, local_max_iters=1)
    x = maximize_acq(lambda Q: np.zeros(len(Q)), BoxDomain.unit(2), cfg)
    np.testing.assert_array_equal(x, sobol_points(32, 2, cfg.seed)[0])


def test_all_nonfinite_raises():
    with pytest.raises(AcquisitionOptimizationError):
        maximize_acq(lambda Q: np.full(len(Q), np.nan), BoxDomain.unit(2), InnerOptConfig(n_random=16))


def test_partially_nonfinite_is_tolerated():
    def f(Q):
        v = -((Q - 0.4) ** 2).sum(1)
        return np.where(Q[:, 0] > 0.8, np.inf, v)

    x = maximize_acq(f, BoxDomain.unit(2))
    np.testing.assert_allclose(x, [0.4, 0.4], atol=1e-3)


def test_pattern_directions_positively_span():
    for d in range(1, 7):
        D = pattern_directions(d)
        assert D.shape == (d + 1, d)
        # a positive combination of all directions cancels
        assert np.allclose(D[:d].sum(0) + np.sqrt(d) * D[d], 0)
        assert np.linalg.matrix_rank(D) == d


def test_config_validation():
    with pytest.raises(ValueError):
        InnerOptConfig(n_random=0)
