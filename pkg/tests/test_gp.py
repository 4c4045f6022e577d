import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_problem
from oracles import dense_lml, dense_posterior, se_kernel_loop

from easybo.gp import (
    JITTER_RETRIES,
    NOISE_FLOOR,
    BoxDomain,
    Dataset,
    KernelHyperparams,
    NumericalFailure,
    condition,
    destandardize,
    fit,
    hallucinate,
    jittered_cholesky,
    kernel_matrix,
    kernel_se,
    log_marginal_likelihood,
    posterior,
    predict,
    standardization,
    standardize,
)


def close_on_scale(a, b, scale, tol=1e-10):
    """Relative agreement measured against the problem's output scale."""
    return np.all(np.abs(np.asarray(a) - np.asarray(b)) <= tol * (np.abs(b) + scale))


# ---- kernel -------------------------------------------------------------


def test_kernel_at_coincident_points_is_signal_variance():
    h = KernelHyperparams([1.0, 1.0], 1.0)
    assert kernel_se([0.3, 0.7], [0.3, 0.7], h) == 1.0
    h = KernelHyperparams([0.2, 3.0], 2.5)
    assert kernel_se([0.3, 0.7], [0.3, 0.7], h) == 2.5


def test_kernel_unit_distance():
    h = KernelHyperparams([1.0], 1.0)
    assert kernel_se([0.0], [1.0], h) == pytest.approx(0.6065306597126334, abs=1e-15)


def test_kernel_dimension_mismatch():
    h = KernelHyperparams([1.0, 1.0], 1.0)
    with pytest.raises(ValueError):
        kernel_se([0.0, 1.0], [0.0, 1.0, 2.0], h)
    with pytest.raises(ValueError):
        kernel_se([0.0], [1.0], h)
    with pytest.raises(ValueError):
        kernel_matrix(np.zeros((2, 3)), np.zeros((2, 3)), h)


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_kernel_exactly_symmetric_and_bounded(d, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(size=(2, d))
    h = KernelHyperparams(rng.uniform(0.01, 10, size=d), rng.uniform(0.01, 100))
    k = kernel_se(a, b, h)
    assert k == kernel_se(b, a, h)
    assert 0.0 <= k <= h.signal_variance


def test_kernel_matrix_matches_loop(rng):
    A, B = rng.uniform(size=(7, 3)), rng.uniform(size=(5, 3))
    h = KernelHyperparams([0.3, 0.8, 2.0], 1.7)
    K = kernel_matrix(A, B, h)
    np.testing.assert_allclose(K, se_kernel_loop(A, B, h.length_scales, 1.7), rtol=1e-13)


# ---- hyperparameters and standardization --------------------------------


def test_noise_is_clamped_to_floor():
    assert KernelHyperparams([1.0], 1.0, 0.0).noise_variance == NOISE_FLOOR
    with pytest.raises(ValueError):
        KernelHyperparams([1.0], 1.0, -1e-3)
    with pytest.raises(ValueError):
        KernelHyperparams([0.0], 1.0)


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40))
def test_standardization_round_trip(values):
    y = np.array(values)
    offset, scale = standardization(y)
    back = destandardize(standardize(y, offset, scale), offset, scale)
    assert np.all(np.abs(back - y) <= 1e-12 * np.maximum(1.0, np.abs(y)) + 1e-12 * scale)


def test_constant_observations_use_floor_scale():
    offset, scale = standardization([3.0, 3.0, 3.0])
    assert offset == 3.0 and scale == 1e-12


def test_domain_round_trip(rng):
    dom = BoxDomain([-5.0, 0.0], [10.0, 15.0])
    x = dom.from_unit(rng.uniform(size=(10, 2)))
    np.testing.assert_allclose(dom.from_unit(dom.to_unit(x)), x, rtol=1e-15, atol=1e-13)
    with pytest.raises(ValueError):
        BoxDomain([0.0, 1.0], [1.0, 1.0])


# ---- jitter -------------------------------------------------------------


def test_jitter_rescues_singular_gram():
    X = np.array([[0.5], [0.5], [0.5]])
    K = kernel_matrix(X, X, KernelHyperparams([1.0], 1.0))
    L = jittered_cholesky(K)
    assert np.allclose(L @ L.T, K, atol=1e-6)


def test_jitter_exhaustion_reports_levels():
    with pytest.raises(NumericalFailure) as info:
        jittered_cholesky(-np.eye(3))
    jitters = info.value.jitters
    assert len(jitters) == JITTER_RETRIES
    assert jitters[0] == 1e-10
    np.testing.assert_allclose(np.diff(np.log10(jitters)), 1.0)


# ---- posterior ----------------------------------------------------------


def test_single_point_interpolates_with_unit_standardizer():
    h = KernelHyperparams([0.3], 1.0, 0.0)
    model = condition(Dataset([[0.4]], [2.0]), h, standardizer=(0.0, 1.0))
    mean, std = posterior(model, [0.4])
    assert mean == pytest.approx(2.0, abs=1e-7)
    assert std <= np.sqrt(NOISE_FLOOR) * 1.0001


def test_single_point_default_standardizer():
    model = condition(Dataset([[0.4]], [2.0]), KernelHyperparams([0.3], 1.0))
    mean, std = posterior(model, [0.4])
    assert mean == pytest.approx(2.0, abs=1e-12)
    assert std < 1e-9


def test_far_query_reverts_to_prior(rng):
    data = Dataset(rng.uniform(0, 0.1, size=(5, 1)), rng.normal(size=5))
    model = condition(data, KernelHyperparams([0.01], 1.3))
    mean, std = posterior(model, [1.0])
    assert mean == pytest.approx(model.y_offset, abs=1e-12)
    assert std == pytest.approx(np.sqrt(1.3) * model.y_scale, rel=1e-12)


def test_three_point_dense_oracle(rng):
    data, h = random_problem(rng, 3, 2)
    model = condition(data, h)
    Q = rng.uniform(size=(20, 2))
    mean, std = predict(model, Q)
    m_ref, v_ref = dense_posterior(
        data.X, data.y, Q, h.length_scales, h.signal_variance, h.noise_variance,
        model.y_offset, model.y_scale,
    )
    assert close_on_scale(mean, m_ref, model.y_scale)
    assert close_on_scale(std**2, v_ref, model.y_scale**2 * h.signal_variance)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 50), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_posterior_matches_dense_inverse(n, d, seed):
    rng = np.random.default_rng(seed)
    data, h = random_problem(rng, n, d)
    model = condition(data, h)
    Q = np.vstack([rng.uniform(size=(10, d)), data.X[:3]])
    mean, std = predict(model, Q)
    m_ref, v_ref = dense_posterior(
        data.X, data.y, Q, h.length_scales, h.signal_variance, h.noise_variance,
        model.y_offset, model.y_scale,
    )
    assert close_on_scale(mean, m_ref, model.y_scale)
    assert close_on_scale(std**2, v_ref, model.y_scale**2 * h.signal_variance)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_posterior_variance_bounded_by_prior(n, d, seed):
    rng = np.random.default_rng(seed)
    data, h = random_problem(rng, n, d)
    model = condition(data, h)
    _, std = predict(model, rng.uniform(size=(50, d)))
    assert np.all(std >= 0)
    assert np.all(std**2 <= h.signal_variance * model.y_scale**2 * (1 + 1e-12))


def test_posterior_rejects_wrong_dimension(rng):
    data, h = random_problem(rng, 4, 2)
    with pytest.raises(ValueError):
        posterior(condition(data, h), [0.1, 0.2, 0.3])


# ---- hallucination --------------------------------------------------------


def test_hallucinate_empty_pending_is_identity(rng):
    data, h = random_problem(rng, 8, 2)
    model = condition(data, h)
    assert hallucinate(model, np.empty((0, 2))) is model


def test_hallucinated_point_keeps_mean_and_collapses_variance(rng):
    data, h = random_problem(rng, 10, 2, noise=NOISE_FLOOR)
    model = condition(data, h)
    pending = np.array([[0.37, 0.61]])
    hm = hallucinate(model, pending)
    assert hm.hyperparams is model.hyperparams
    assert (hm.y_offset, hm.y_scale) == (model.y_offset, model.y_scale)
    mu, _ = posterior(model, pending[0])
    mu_hat, std_hat = posterior(hm, pending[0])
    assert mu_hat == pytest.approx(mu, rel=1e-9, abs=1e-9 * model.y_scale)
    assert std_hat <= np.sqrt(NOISE_FLOOR) * model.y_scale * 1.0001


def test_two_pending_never_increase_std_on_grid(rng):
    data, h = random_problem(rng, 10, 2)
    model = condition(data, h)
    hm = hallucinate(model, rng.uniform(size=(2, 2)))
    g = np.linspace(0, 1, 10)
    grid = np.array(np.meshgrid(g, g)).reshape(2, -1).T
    m0, s0 = predict(model, grid)
    m1, s1 = predict(hm, grid)
    assert np.all(s1 <= s0 + 1e-12 * model.y_scale)
    np.testing.assert_allclose(m1, m0, rtol=1e-8, atol=1e-8 * model.y_scale)


# ---- marginal likelihood and fitting --------------------------------------


def test_lml_matches_dense_oracle(rng):
    X = rng.uniform(size=(12, 3))
    z = rng.normal(size=12)
    theta = np.log([0.4, 0.7, 1.3, 1.1, 1e-2])
    lml = log_marginal_likelihood(theta, X, z, with_grad=False)
    assert lml == pytest.approx(dense_lml(theta, X, z), rel=1e-10)


def test_lml_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    for _ in range(10):
        d = int(rng.integers(1, 5))
        n = int(rng.integers(5, 25))
        X = rng.uniform(size=(n, d))
        z = rng.normal(size=n)
        theta = np.concatenate(
            [rng.uniform(np.log(0.1), np.log(2.0), d), [rng.uniform(-1, 1)], [rng.uniform(-7, -2)]]
        )
        _, grad = log_marginal_likelihood(theta, X, z)
        fd = np.empty_like(theta)
        eps = 1e-5
        for k in range(theta.size):
            e = np.zeros_like(theta)
            e[k] = eps
            fd[k] = (
                log_marginal_likelihood(theta + e, X, z, with_grad=False)
                - log_marginal_likelihood(theta - e, X, z, with_grad=False)
            ) / (2 * eps)
        assert np.linalg.norm(grad - fd) <= 1e-5 * max(1.0, np.linalg.norm(fd))


def test_fit_needs_two_points():
    with pytest.raises(ValueError):
        fit(Dataset([[0.5]], [1.0]), seed=0)


def test_fit_on_duplicate_inputs_raises_noise():
    model = fit(Dataset([[0.5], [0.5]], [0.0, 1.0]), seed=0)
    assert model.hyperparams.noise_variance > NOISE_FLOOR


def test_fit_recovers_sine():
    x = np.linspace(0, 1, 20)
    model = fit(Dataset(x[:, None], np.sin(2 * np.pi * x)), seed=0)
    xt = np.random.default_rng(1).uniform(size=10)
    mean, _ = predict(model, xt[:, None])
    assert np.max(np.abs(mean - np.sin(2 * np.pi * xt))) < 0.05


def test_fit_is_deterministic_and_in_bounds(rng):
    data, _ = random_problem(rng, 15, 3)
    a = fit(data, seed=11).hyperparams
    b = fit(data, seed=11).hyperparams
    np.testing.assert_array_equal(a.to_log_vector(), b.to_log_vector())
    assert np.all((a.length_scales >= 1e-2) & (a.length_scales <= 10))
    assert 1e-2 <= a.signal_variance <= 1e2
    assert NOISE_FLOOR <= a.noise_variance <= 1e-1


def test_warm_start_is_not_worse(rng):
    data, _ = random_problem(rng, 20, 2)
    cold = fit(data, seed=3)
    warm = fit(data, seed=4, previous=cold.hyperparams, n_starts=1)
    z = standardize(data.y, *standardization(data.y))
    l_cold = log_marginal_likelihood(cold.hyperparams.to_log_vector(), data.X, z, with_grad=False)
    l_warm = log_marginal_likelihood(warm.hyperparams.to_log_vector(), data.X, z, with_grad=False)
    assert l_warm >= l_cold - 1e-6


def test_hallucinated_predictor_matches_reference(rng):
    from easybo.gp import hallucinated_predictor, predict_hallucinated

    data, h = random_problem(rng, 30, 3, noise=NOISE_FLOOR)
    model = condition(data, h)
    pen = hallucinate(model, rng.uniform(size=(5, 3)))
    Q = np.vstack([rng.uniform(size=(200, 3)), pen.X[-5:]])
    m_ref, s_ref = predict_hallucinated(model, pen, Q)
    m, s = hallucinated_predictor(model, pen)(Q)
    np.testing.assert_allclose(m, m_ref, rtol=1e-9, atol=1e-9 * model.y_scale)
    np.testing.assert_allclose(s, s_ref, atol=1e-6 * model.y_scale)
