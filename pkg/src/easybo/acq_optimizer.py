"""Inner maximization of an acquisition function over the unit cube."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc


class AcquisitionOptimizationError(RuntimeError):
    """Every screening evaluation of the acquisition was non-finite."""


@dataclass(frozen=True)
class InnerOptConfig:
    n_random: int = 2048
    n_local_starts: int = 10
    local_max_iters: int = 50
    seed: int | None = 0
    initial_step: float = 0.1
    min_step: float = 1e-7

    def __post_init__(self):
        for name in ("n_random", "n_local_starts", "local_max_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


def sobol_points(n: int, dim: int, seed) -> np.ndarray:
    """Scrambled Sobol points in the unit cube (first ``n`` of the sequence)."""
    sampler = qmc.Sobol(dim, scramble=True, seed=seed)
    with warnings.catch_warnings():
        # balance warnings for non powers of two are irrelevant here
        warnings.simplefilter("ignore", UserWarning)
        return sampler.random(n)


def pattern_directions(dim: int) -> np.ndarray:
    """Minimal positive spanning set: the ``d`` coordinate axes plus their negated mean direction."""
    dirs = np.vstack([np.eye(dim), -np.ones((1, dim)) / np.sqrt(dim)])
    return dirs


def _finite(values) -> np.ndarray:
    values = np.asarray(values, dtype=float).ravel()
    return np.where(np.isfinite(values), values, -np.inf)


def maximize_acq(f, domain, cfg: InnerOptConfig = InnerOptConfig()) -> np.ndarray:
    """Maximize ``f`` over the unit cube of ``domain``.

    ``f`` maps an ``(n, d)`` array of unit-cube points to ``n`` values. The
    search screens ``cfg.n_random`` scrambled Sobol points, then runs a
    compass search with a shrinking step from the best ``cfg.n_local_starts``
    of them. The poll set alternates between a minimal positive basis and
    its negation. All local searches advance together, one batched call of ``f``
    per iteration, so ``f`` sees at most
    ``n_random + n_local_starts * local_max_iters * (d + 1)`` points.

    Returns
    -------
    numpy.ndarray
        The best point found, in unit-cube coordinates.
    """
    dim = domain.dim if hasattr(domain, "dim") else int(domain)
    X = sobol_points(cfg.n_random, dim, cfg.seed)
    vals = _finite(f(X))
    if not np.any(np.isfinite(vals)):
        raise AcquisitionOptimizationError("acquisition was non-finite at every screening point")

    # stable sort: ties go to the lowest screening index
    order = np.argsort(-vals, kind="stable")
    n_starts = min(cfg.n_local_starts, int(np.isfinite(vals).sum()))
    start_idx = order[:n_starts]
    x = X[start_idx].copy()
    fx = vals[start_idx].copy()

    base = pattern_directions(dim)
    n_dirs = base.shape[0]
    step = np.full(n_starts, cfg.initial_step)
    misses = np.zeros(n_starts, dtype=int)
    for it in range(cfg.local_max_iters):
        active = step >= cfg.min_step
        if not active.any():
            break
        # alternate the basis and its negation so every +-axis gets polled,
        # which a single minimal basis cannot guarantee at the cube's faces
        dirs = base if it % 2 == 0 else -base
        idx = np.flatnonzero(active)
        cand = np.clip(x[idx, None, :] + step[idx, None, None] * dirs[None], 0.0, 1.0)
        cvals = _finite(f(cand.reshape(-1, dim))).reshape(idx.size, n_dirs)
        best_dir = np.argmax(cvals, axis=1)
        best_val = cvals[np.arange(idx.size), best_dir]
        improved = best_val > fx[idx]
        moved = idx[improved]
        x[moved] = cand[improved, best_dir[improved]]
        fx[moved] = best_val[improved]
        misses[moved] = 0
        stuck = idx[~improved]
        misses[stuck] += 1
        # shrink only once both orientations have failed at this step
        shrink = stuck[misses[stuck] >= 2]
        step[shrink] *= 0.5
        misses[shrink] = 0

    # starts are ordered by screening rank, so argmax keeps the earliest on ties
    winner = int(np.argmax(fx))
    return np.clip(x[winner], 0.0, 1.0)
