"""Gaussian process regression with a squared-exponential ARD kernel.

Inputs are mapped affinely from a :class:`BoxDomain` onto the unit cube and
observations are standardized before any kernel evaluation. All models are
immutable; :func:`fit`, :func:`condition` and :func:`hallucinate` return new
:class:`GpModel` instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.linalg.lapack import dpotrf, dpotri, dpotrs
from scipy.optimize import minimize

NOISE_FLOOR = 1e-8
STD_FLOOR = 1e-12

JITTER_START = 1e-10
JITTER_GROWTH = 10.0
JITTER_RETRIES = 6

LENGTH_SCALE_BOUNDS = (1e-2, 10.0)
SIGNAL_VARIANCE_BOUNDS = (1e-2, 1e2)
NOISE_VARIANCE_BOUNDS = (NOISE_FLOOR, 1e-1)


class NumericalFailure(RuntimeError):
    """Raised when a covariance matrix cannot be factorized.

    Attributes
    ----------
    jitters : list of float
        Diagonal jitter levels that were attempted, in order.
    """

    def __init__(self, message, jitters=()):
        super().__init__(message)
        self.jitters = list(jitters)


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box ``lower <= x <= upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size < 1:
            raise ValueError("lower and upper must be 1-d vectors of equal length >= 1")
        if not np.all(lower < upper):
            raise ValueError("lower[i] < upper[i] must hold for every dimension")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def unit(cls, dim: int) -> BoxDomain:
        return cls(np.zeros(dim), np.ones(dim))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def to_unit(self, x) -> np.ndarray:
        """Map points from the box onto the unit cube."""
        return (np.asarray(x, dtype=float) - self.lower) / self.span

    def from_unit(self, u) -> np.ndarray:
        """Map unit-cube points back into the box."""
        return self.lower + np.asarray(u, dtype=float) * self.span


@dataclass(frozen=True)
class Dataset:
    """Training inputs ``X`` (unit-cube coordinates, shape ``(N, d)``) and observations ``y``."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float)).ravel()
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} inputs but {y.shape[0]} observations")
        if not np.all(np.isfinite(y)):
            raise ValueError("observations must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def count(self) -> int:
        return self.y.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def append(self, X, y) -> Dataset:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return Dataset(np.vstack([self.X, X]), np.concatenate([self.y, np.atleast_1d(y)]))


@dataclass(frozen=True)
class KernelHyperparams:
    """SE-ARD kernel hyperparameters (in standardized-output units)."""

    length_scales: np.ndarray
    signal_variance: float
    noise_variance: float = NOISE_FLOOR

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.length_scales, dtype=float))
        if not np.all(ls > 0):
            raise ValueError("length scales must be positive")
        if not self.signal_variance > 0:
            raise ValueError("signal variance must be positive")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be nonnegative")
        object.__setattr__(self, "length_scales", ls)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))
        object.__setattr__(self, "noise_variance", max(float(self.noise_variance), NOISE_FLOOR))

    def to_log_vector(self) -> np.ndarray:
        return np.log(np.concatenate([self.length_scales, [self.signal_variance, self.noise_variance]]))

    @classmethod
    def from_log_vector(cls, theta) -> KernelHyperparams:
        theta = np.asarray(theta, dtype=float)
        return cls(np.exp(theta[:-2]), float(np.exp(theta[-2])), float(np.exp(theta[-1])))


def _sq_dists(A: np.ndarray, B: np.ndarray, length_scales: np.ndarray) -> np.ndarray:
    A = A / length_scales
    B = B / length_scales
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d2, 0.0)


def kernel_matrix(A, B, h: KernelHyperparams) -> np.ndarray:
    """Cross-covariance ``k(A, B)`` for row-stacked point sets."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    if A.shape[1] != B.shape[1] or A.shape[1] != h.length_scales.size:
        raise ValueError("dimension mismatch between points and length scales")
    return h.signal_variance * np.exp(-0.5 * _sq_dists(A, B, h.length_scales))


def kernel_se(a, b, h: KernelHyperparams) -> float:
    """Squared-exponential ARD kernel between two points.

    Evaluated directly on the coordinate difference so the result is exactly
    symmetric in its arguments.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape or a.size != h.length_scales.size:
        raise ValueError(
            f"dimension mismatch: {a.size}, {b.size} vs {h.length_scales.size} length scales"
        )
    r = (a - b) / h.length_scales
    return float(h.signal_variance * np.exp(-0.5 * np.dot(r, r)))


def jittered_cholesky(K: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of ``K``, adding diagonal jitter on failure.

    Jitter starts at ``JITTER_START`` and grows by ``JITTER_GROWTH`` for at
    most ``JITTER_RETRIES`` retries.
    """
    try:
        return np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        pass
    tried = []
    jitter = JITTER_START
    eye = np.eye(K.shape[0])
    for _ in range(JITTER_RETRIES):
        tried.append(jitter)
        try:
            return np.linalg.cholesky(K + jitter * eye)
        except np.linalg.LinAlgError:
            jitter *= JITTER_GROWTH
    raise NumericalFailure(f"Cholesky failed after jitter levels {tried}", tried)


@dataclass(frozen=True)
class GpModel:
    """Conditioned GP posterior.

    ``data.y`` holds observations on their original scale; the factorization
    and ``alpha`` refer to the standardized targets
    ``(y - y_offset) / y_scale``.
    """

    hyperparams: KernelHyperparams
    data: Dataset
    y_offset: float
    y_scale: float
    chol_factor: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)

    @property
    def X(self) -> np.ndarray:
        return self.data.X

    @property
    def y_standardized(self) -> np.ndarray:
        return standardize(self.data.y, self.y_offset, self.y_scale)


def standardization(y) -> tuple[float, float]:
    """Offset and scale used to standardize ``y`` (scale floored at ``STD_FLOOR``)."""
    y = np.asarray(y, dtype=float)
    return float(y.mean()), float(max(y.std(), STD_FLOOR))


def standardize(y, offset: float, scale: float) -> np.ndarray:
    return (np.asarray(y, dtype=float) - offset) / scale


def destandardize(z, offset: float, scale: float) -> np.ndarray:
    return np.asarray(z, dtype=float) * scale + offset


def _build(h: KernelHyperparams, data: Dataset, offset: float, scale: float) -> GpModel:
    K = kernel_matrix(data.X, data.X, h)
    K[np.diag_indices_from(K)] += h.noise_variance
    L = jittered_cholesky(K)
    alpha = cho_solve((L, True), standardize(data.y, offset, scale))
    return GpModel(h, data, offset, scale, L, alpha)


def condition(data: Dataset, hyperparams: KernelHyperparams, standardizer=None) -> GpModel:
    """Condition a GP with fixed hyperparameters on ``data``.

    ``standardizer`` is an ``(offset, scale)`` pair; by default it is computed
    from ``data.y``.
    """
    if data.count < 1:
        raise ValueError("cannot condition on an empty dataset")
    if data.dim != hyperparams.length_scales.size:
        raise ValueError("dataset dimension does not match length scales")
    offset, scale = standardization(data.y) if standardizer is None else standardizer
    return _build(hyperparams, data, offset, scale)


def predict(model: GpModel, Q) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized posterior mean and standard deviation at rows of ``Q``.

    Both are returned on the original output scale. Negative variances from
    round-off are clamped to zero.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    h = model.hyperparams
    Kq = kernel_matrix(Q, model.X, h)
    mean = Kq @ model.alpha
    v = solve_triangular(model.chol_factor, Kq.T, lower=True, check_finite=False)
    var = np.maximum(h.signal_variance - (v * v).sum(0), 0.0)
    return (
        destandardize(mean, model.y_offset, model.y_scale),
        np.sqrt(var) * model.y_scale,
    )


def predict_hallucinated(model: GpModel, penalized: GpModel, Q) -> tuple[np.ndarray, np.ndarray]:
    """Mean of ``model`` and stddev of ``penalized = hallucinate(model, ...)`` at ``Q``.

    Shares a single cross-kernel evaluation, since the training inputs of
    ``penalized`` start with those of ``model``.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    h = penalized.hyperparams
    Kq = kernel_matrix(Q, penalized.X, h)
    mean = Kq[:, : model.data.count] @ model.alpha
    v = solve_triangular(penalized.chol_factor, Kq.T, lower=True, check_finite=False)
    var = np.maximum(h.signal_variance - (v * v).sum(0), 0.0)
    return (
        destandardize(mean, model.y_offset, model.y_scale),
        np.sqrt(var) * penalized.y_scale,
    )


def hallucinated_predictor(model: GpModel, penalized: GpModel):
    """Reusable form of :func:`predict_hallucinated` for many query batches.

    Inverts the Cholesky factor of ``penalized`` once so each later batch
    costs one matrix product instead of a triangular solve. Meant for inner
    acquisition loops; :func:`predict` stays the accurate reference path.
    """
    n = model.data.count
    h = penalized.hyperparams
    L = penalized.chol_factor
    inv_t = solve_triangular(L, np.eye(L.shape[0]), lower=True, check_finite=False).T

    def evaluate(Q):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        Kq = kernel_matrix(Q, penalized.X, h)
        v = Kq @ inv_t
        var = np.maximum(h.signal_variance - (v * v).sum(1), 0.0)
        return (
            destandardize(Kq[:, :n] @ model.alpha, model.y_offset, model.y_scale),
            np.sqrt(var) * penalized.y_scale,
        )

    return evaluate


def posterior(model: GpModel, q) -> tuple[float, float]:
    """Posterior ``(mean, stddev)`` at a single unit-cube point."""
    q = np.asarray(q, dtype=float).ravel()
    if q.size != model.data.dim:
        raise ValueError(f"query has dimension {q.size}, model has {model.data.dim}")
    mean, std = predict(model, q[None, :])
    return float(mean[0]), float(std[0])


def hallucinate(model: GpModel, pending) -> GpModel:
    """Condition on pending points as if they returned their posterior mean.

    Hyperparameters and the output standardization are reused unchanged, so
    the posterior mean is preserved while the variance collapses around the
    pending points.
    """
    pending = np.asarray(pending, dtype=float)
    if pending.size == 0:
        return model
    pending = np.atleast_2d(pending)
    mean, _ = predict(model, pending)
    data = model.data.append(pending, mean)
    return _build(model.hyperparams, data, model.y_offset, model.y_scale)


# --------------------------------------------------------------------------
# Marginal likelihood and fitting
# --------------------------------------------------------------------------


def pairwise_sq_diffs(X: np.ndarray) -> np.ndarray:
    """Per-dimension squared differences, shape ``(d, N, N)``."""
    X = np.asarray(X, dtype=float)
    return (X.T[:, :, None] - X.T[:, None, :]) ** 2


def _chol_lower(K: np.ndarray):
    """``dpotrf`` with jitter escalation; returns the factor with a zeroed upper triangle."""
    L, info = dpotrf(K, lower=1, clean=1)
    if info == 0:
        return L
    n = K.shape[0]
    tried = []
    jitter = JITTER_START
    for _ in range(JITTER_RETRIES):
        tried.append(jitter)
        Kj = K.copy()
        Kj.flat[:: n + 1] += jitter
        L, info = dpotrf(Kj, lower=1, clean=1)
        if info == 0:
            return L
        jitter *= JITTER_GROWTH
    raise NumericalFailure(f"Cholesky failed after jitter levels {tried}", tried)


def log_marginal_likelihood(theta, X, z, with_grad=True, sq_diffs=None):
    """Log marginal likelihood of standardized targets ``z``.

    ``theta`` is ``log([l_1..l_d, signal_variance, noise_variance])``.
    Returns ``(lml, grad)`` with the gradient taken with respect to ``theta``
    when ``with_grad`` is set, otherwise just ``lml``. ``sq_diffs`` may carry
    a precomputed :func:`pairwise_sq_diffs` of ``X``.
    """
    theta = np.asarray(theta, dtype=float)
    n, d = X.shape
    D = pairwise_sq_diffs(X) if sq_diffs is None else sq_diffs
    D = D.reshape(d, n * n)
    inv_l2 = np.exp(-2.0 * theta[:d])
    sf2 = np.exp(theta[d])
    sn2 = np.exp(theta[d + 1])

    Kf = sf2 * np.exp(-0.5 * (inv_l2 @ D)).reshape(n, n)
    K = Kf.copy()
    K.flat[:: n + 1] += sn2
    L = _chol_lower(K)
    alpha, _ = dpotrs(L, z, lower=1)
    lml = -0.5 * z @ alpha - np.log(L.diagonal()).sum() - 0.5 * n * np.log(2 * np.pi)
    if not with_grad:
        return lml

    Kinv, info = dpotri(L, lower=1)
    if info != 0:
        raise NumericalFailure(f"dpotri failed with info={info}")
    # dpotri fills the lower triangle only; the upper one is still zero
    Kinv = Kinv + Kinv.T
    Kinv.flat[:: n + 1] *= 0.5
    W = np.outer(alpha, alpha)
    W -= Kinv
    WK = W * Kf
    grad = np.empty(d + 2)
    grad[:d] = 0.5 * inv_l2 * (D @ WK.ravel())
    grad[d] = 0.5 * WK.sum()
    grad[d + 1] = 0.5 * sn2 * W.trace()
    return lml, grad


def hyperparameter_bounds(dim: int) -> np.ndarray:
    """Log-space box bounds for ``theta``, one row per parameter."""
    rows = [LENGTH_SCALE_BOUNDS] * dim + [SIGNAL_VARIANCE_BOUNDS, NOISE_VARIANCE_BOUNDS]
    return np.log(np.array(rows, dtype=float))


def fit(
    data: Dataset,
    domain: BoxDomain | None = None,
    seed=None,
    previous: KernelHyperparams | None = None,
    n_starts: int = 8,
    maxiter: int = 200,
) -> GpModel:
    """Fit hyperparameters by multi-start maximization of the marginal likelihood.

    Parameters
    ----------
    data : Dataset
        Observations with inputs already in unit-cube coordinates.
    domain : BoxDomain, optional
        Only used to check the dimension; inputs are expected normalized.
    seed : int or numpy Generator
        Drives the log-uniform start sampling; fits are deterministic in it.
    previous : KernelHyperparams, optional
        Warm start, used as the first of the ``n_starts`` starts.
    n_starts : int
        Number of L-BFGS-B starts.
    maxiter : int
        Iteration cap per start.
    """
    if data.count < 2:
        raise ValueError("fit needs at least two observations")
    if domain is not None and domain.dim != data.dim:
        raise ValueError("dataset dimension does not match domain")
    rng = np.random.default_rng(seed)
    d = data.dim
    bounds = hyperparameter_bounds(d)
    offset, scale = standardization(data.y)
    z = standardize(data.y, offset, scale)
    X = data.X
    D = pairwise_sq_diffs(X)

    starts = rng.uniform(bounds[:, 0], bounds[:, 1], size=(n_starts, d + 2))
    if previous is not None:
        starts[0] = np.clip(previous.to_log_vector(), bounds[:, 0], bounds[:, 1])

    def negative(theta):
        try:
            lml, grad = log_marginal_likelihood(theta, X, z, sq_diffs=D)
        except NumericalFailure:
            return 1e25, np.zeros_like(theta)
        return -lml, -grad

    best_theta, best_value = None, np.inf
    for start in starts:
        res = minimize(
            negative, start, jac=True, method="L-BFGS-B", bounds=bounds,
            options={"maxiter": maxiter},
        )
        # strict comparison keeps the earliest start on ties
        if np.isfinite(res.fun) and res.fun < best_value:
            best_theta, best_value = res.x, res.fun
    if best_theta is None:
        raise NumericalFailure("no hyperparameter start produced a finite likelihood")
    # clip in linear space: exp(log(b)) can overshoot b by an ulp
    rows = np.array([LENGTH_SCALE_BOUNDS] * d + [SIGNAL_VARIANCE_BOUNDS, NOISE_VARIANCE_BOUNDS])
    lo, hi = rows[:, 0], rows[:, 1]
    p = np.clip(np.exp(best_theta), lo, hi)
    h = KernelHyperparams(p[:d], float(p[d]), float(p[d + 1]))
    return _build(h, data, offset, scale)
