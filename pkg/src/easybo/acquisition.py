"""Acquisition functions.

Every function accepts either a single unit-cube point (shape ``(d,)``),
returning a float, or a stack of points (shape ``(n, d)``), returning an
array. Values are on the original output scale and follow the maximization
convention.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .gp import GpModel, hallucinate, hallucinated_predictor, predict

PENALTY_SENTINEL = 1e300
_LOG_SENTINEL = np.log(PENALTY_SENTINEL)


class AcqKind(str, enum.Enum):
    UCB = "UCB"
    LCB = "LCB"
    EI = "EI"
    PBO = "PBO"
    PHCBO = "PHCBO"
    EASYBO = "EASYBO"


@dataclass(frozen=True)
class AcquisitionSpec:
    """Which acquisition to use and its parameters.

    ``hc_distance`` and ``hc_scale`` default to ``None``, meaning they are
    derived from the problem dimension and the observation range at
    suggestion time (see :func:`default_hc_distance`, :func:`default_hc_scale`).
    ``hallucinate`` only matters for ``EASYBO``; turning it off gives the
    ablation that ignores pending points.
    """

    kind: AcqKind = AcqKind.EASYBO
    kappa: float = 2.0
    weight: float = 0.5
    lam: float = 6.0
    hc_distance: float | None = None
    hc_scale: float | None = None
    history_window: int = 5
    hc_per_slot: bool = True
    hallucinate: bool = True

    def __post_init__(self):
        object.__setattr__(self, "kind", AcqKind(self.kind))
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError("weight must lie in [0, 1]")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.hc_distance is not None and not self.hc_distance > 0:
            raise ValueError("hc_distance must be positive")
        if self.hc_scale is not None and not self.hc_scale > 0:
            raise ValueError("hc_scale must be positive")
        if self.history_window < 1:
            raise ValueError("history_window must be >= 1")


def _rows(q):
    q = np.asarray(q, dtype=float)
    return np.atleast_2d(q), q.ndim == 1


def _out(values, single):
    return float(values[0]) if single else values


def ucb(mu, sigma, kappa):
    return mu + kappa * sigma


def pbo(mu, sigma, w):
    return (1.0 - w) * mu + w * sigma


def acq_ucb(model: GpModel, q, kappa: float):
    """Upper confidence bound ``mu + kappa * sigma``."""
    Q, single = _rows(q)
    mu, sigma = predict(model, Q)
    return _out(ucb(mu, sigma, kappa), single)


def acq_lcb(model: GpModel, q, kappa: float):
    """Lower confidence bound ``mu - kappa * sigma`` (for minimization callers)."""
    Q, single = _rows(q)
    mu, sigma = predict(model, Q)
    return _out(ucb(mu, sigma, -kappa), single)


def expected_improvement(mu, sigma, best):
    """Closed-form ``E[max(f - best, 0)]`` for ``f ~ N(mu, sigma^2)``."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    gap = mu - best
    safe = np.where(sigma > 0, sigma, 1.0)
    with np.errstate(over="ignore", invalid="ignore"):
        z = gap / safe
        ei = gap * ndtr(z) + safe * np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)
    return np.where(sigma > 0, np.maximum(ei, 0.0), np.maximum(gap, 0.0))


def acq_ei(model: GpModel, q, best: float):
    Q, single = _rows(q)
    mu, sigma = predict(model, Q)
    return _out(expected_improvement(mu, sigma, best), single)


def acq_pbo(model: GpModel, q, w: float):
    """Weighted mean/uncertainty trade-off ``(1 - w) * mu + w * sigma``."""
    Q, single = _rows(q)
    mu, sigma = predict(model, Q)
    return _out(pbo(mu, sigma, w), single)


def slot_weights(batch_size: int) -> np.ndarray:
    """Evenly spaced per-slot weights ``(i - 1) / (B - 1)`` for ``i = 1..B``."""
    if batch_size < 2:
        raise ValueError("slot weights need a batch size of at least 2")
    return np.arange(batch_size) / (batch_size - 1)


def default_hc_distance(dim: int) -> float:
    """5% of the unit-cube diagonal."""
    return 0.05 * np.sqrt(dim)


def default_hc_scale(y) -> float:
    """Ten times the observed value range, floored at one."""
    y = np.asarray(y, dtype=float)
    spread = float(y.max() - y.min()) if y.size else 0.0
    return 10.0 * max(spread, 1.0)


def log_penalty_hc(q, history, d: float, n_hc: float, window: int = 5):
    """Natural log of :func:`penalty_hc`; ``-inf`` for an empty history."""
    Q, single = _rows(q)
    H = np.asarray(history, dtype=float)
    if H.size == 0:
        return _out(np.full(Q.shape[0], -np.inf), single)
    H = np.atleast_2d(H)
    dist = np.sqrt(((Q[:, None, :] - H[None, :, :]) ** 2).sum(-1))
    with np.errstate(divide="ignore", over="ignore"):
        ratio = np.where(dist > 0, d / dist, np.inf)
        exponent = (ratio**10).sum(1) / window
    log_pen = np.log(n_hc) + exponent
    return _out(np.minimum(log_pen, _LOG_SENTINEL), single)


def penalty_hc(q, history, d: float, n_hc: float, window: int = 5):
    """High-coverage penalty around recent query points.

    ``n_hc * (prod_j exp((d / ||q - h_j||) ** 10)) ** (1 / window)`` over the
    supplied history rows. Values that would overflow, including exact
    repeats of a history point, saturate at :data:`PENALTY_SENTINEL`. An
    empty history gives no penalty (zero).
    """
    log_pen = np.atleast_1d(log_penalty_hc(q, history, d, n_hc, window))
    pen = np.where(log_pen >= _LOG_SENTINEL, PENALTY_SENTINEL, np.exp(log_pen))
    return _out(pen, np.asarray(q).ndim == 1)


def acq_phcbo(model: GpModel, q, w: float, history, spec: AcquisitionSpec):
    """pBO value minus the high-coverage penalty.

    ``spec.hc_distance`` and ``spec.hc_scale`` fall back to their
    data-derived defaults when unset.
    """
    Q, single = _rows(q)
    d = spec.hc_distance if spec.hc_distance is not None else default_hc_distance(Q.shape[1])
    n_hc = spec.hc_scale if spec.hc_scale is not None else default_hc_scale(model.data.y)
    base = np.atleast_1d(acq_pbo(model, Q, w))
    pen = np.atleast_1d(penalty_hc(Q, history, d, n_hc, spec.history_window))
    return _out(base - pen, single)


def sample_weight(lam: float, rng: np.random.Generator, size=None):
    """Draw ``kappa ~ U[0, lam]`` and return ``w = kappa / (kappa + 1)``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    kappa = rng.uniform(0.0, lam, size=size)
    return kappa / (kappa + 1.0)


def weight_cdf(w, lam: float):
    """CDF of :func:`sample_weight` draws on ``[0, lam / (lam + 1)]``."""
    w = np.clip(np.asarray(w, dtype=float), 0.0, lam / (lam + 1.0))
    return w / ((1.0 - w) * lam)


def weight_density(w, lam: float):
    w = np.asarray(w, dtype=float)
    inside = (w >= 0) & (w <= lam / (lam + 1.0))
    return np.where(inside, 1.0 / (lam * (1.0 - np.where(inside, w, 0.0)) ** 2), 0.0)


def weight_mean(lam: float) -> float:
    return 1.0 - np.log1p(lam) / lam


def easybo_evaluator(model: GpModel, pending, w: float, use_pending: bool = True):
    """Build the randomized-weight acquisition for one suggestion.

    The hallucinated model is constructed once here and reused for every
    candidate the returned callable is asked about.
    """
    pending = np.asarray(pending, dtype=float)
    penalized = hallucinate(model, pending) if use_pending and pending.size else model
    predictor = hallucinated_predictor(model, penalized)

    def evaluate(Q):
        mu, sigma_hat = predictor(Q)
        return pbo(mu, sigma_hat, w)

    return evaluate


def acq_easybo(model: GpModel, pending, q, w: float):
    """``(1 - w) * mu(q) + w * sigma_hat(q)`` with pending points hallucinated."""
    Q, single = _rows(q)
    return _out(easybo_evaluator(model, pending, w)(Q), single)
