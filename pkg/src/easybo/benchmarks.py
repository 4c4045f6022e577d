"""Synthetic expensive black-box problems with simulated evaluation times.

All objectives use the maximization convention; minimization test functions
are negated when registered. Objectives take points in the problem's own
box coordinates, duration models take unit-cube coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .gp import BoxDomain

BRANIN_MAX = -0.397887357729738
HARTMANN6_MAX = 3.322368011415515

OPAMP_FOM_WEIGHTS = (1.2, 10.0, 1.6)
CLASSE_FOM_WEIGHTS = (3.0, 1.0)


# --------------------------------------------------------------------------
# Duration models
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantDuration:
    seconds: float = 10.0

    def __post_init__(self):
        if not self.seconds > 0:
            raise ValueError("duration must be positive")

    def __call__(self, u, rng: np.random.Generator) -> float:
        return float(self.seconds)


@dataclass(frozen=True)
class LogNormalDuration:
    """``median * exp(sigma * Z)`` with ``Z`` standard normal.

    One normal variate is consumed per draw even when ``sigma == 0``, so
    changing ``sigma`` never shifts the random stream.
    """

    median: float = 10.0
    sigma: float = 0.5

    def __post_init__(self):
        if not self.median > 0 or self.sigma < 0:
            raise ValueError("need median > 0 and sigma >= 0")

    def __call__(self, u, rng: np.random.Generator) -> float:
        z = rng.standard_normal()
        return float(self.median * np.exp(self.sigma * z))


@dataclass(frozen=True)
class InputDependentDuration:
    """Duration growing linearly with one unit-cube coordinate.

    ``base * (1 + slope * u[coordinate])``, optionally times log-normal noise.
    """

    base: float = 10.0
    coordinate: int = 0
    slope: float = 2.0
    sigma: float = 0.0

    def __post_init__(self):
        if not self.base > 0 or self.slope < 0 or self.sigma < 0:
            raise ValueError("need base > 0, slope >= 0 and sigma >= 0")

    def __call__(self, u, rng: np.random.Generator) -> float:
        u = np.asarray(u, dtype=float)
        scale = self.base * (1.0 + self.slope * float(np.clip(u[self.coordinate], 0.0, 1.0)))
        return float(scale * np.exp(self.sigma * rng.standard_normal()))


def make_duration_model(kind: str = "lognormal", **params):
    """Duration model by name: ``constant``, ``lognormal`` or ``input``."""
    kinds = {
        "constant": ConstantDuration,
        "lognormal": LogNormalDuration,
        "input": InputDependentDuration,
    }
    try:
        cls = kinds[kind]
    except KeyError:
        raise ValueError(f"unknown duration model {kind!r}; choose from {sorted(kinds)}") from None
    return cls(**params)


# --------------------------------------------------------------------------
# Problems
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Problem:
    name: str
    domain: BoxDomain
    objective: Callable[[np.ndarray], float]
    duration_model: Callable = field(default_factory=LogNormalDuration)
    known_optimum: float | None = None
    optimizer_location: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.domain.dim

    def evaluate(self, x) -> float:
        """Objective at a point in box coordinates."""
        return float(self.objective(np.asarray(x, dtype=float)))

    def evaluate_unit(self, u) -> float:
        return self.evaluate(self.domain.from_unit(u))

    def with_duration(self, model) -> Problem:
        return replace(self, duration_model=model)


@dataclass(frozen=True)
class FomSpec:
    """Weighted figure of merit ``sum_i weights[i] * metrics[i](x)``."""

    metrics: Sequence[Callable]
    weights: Sequence[float]
    names: Sequence[str] = ()

    def __post_init__(self):
        if len(self.metrics) != len(self.weights):
            raise ValueError("metrics and weights must have the same length")


def fom_evaluate(spec: FomSpec, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(sum(a * f(x) for a, f in zip(spec.weights, spec.metrics)))


def branin(x):
    """Branin function (minimization form); ``x`` has shape ``(..., 2)``."""
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    a, b, c = 1.0, 5.1 / (4 * np.pi**2), 5.0 / np.pi
    r, s, t = 6.0, 10.0, 1.0 / (8 * np.pi)
    return a * (x2 - b * x1**2 + c * x1 - r) ** 2 + s * (1 - t) * np.cos(x1) + s


_H6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_H6_A = np.array(
    [
        [10, 3, 17, 3.5, 1.7, 8],
        [0.05, 10, 17, 0.1, 8, 14],
        [3, 3.5, 1.7, 10, 17, 8],
        [17, 8, 0.05, 10, 0.1, 14],
    ]
)
_H6_P = 1e-4 * np.array(
    [
        [1312, 1696, 5569, 124, 8283, 5886],
        [2329, 4135, 8307, 3736, 1004, 9991],
        [2348, 1451, 3522, 2883, 3047, 6650],
        [4047, 8828, 8732, 5743, 1091, 381],
    ]
)
HARTMANN6_ARGMAX = np.array([0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573])


def hartmann6(x):
    """Hartmann 6-d function (minimization form); ``x`` has shape ``(..., 6)``."""
    x = np.asarray(x, dtype=float)
    inner = (_H6_A * (x[..., None, :] - _H6_P) ** 2).sum(-1)
    return -(_H6_ALPHA * np.exp(-inner)).sum(-1)


def _negated(f):
    def g(x):
        return -f(x)

    g.__name__ = f"neg_{f.__name__}"
    return g


# Synthetic stand-ins for amplifier metrics on normalized sizing variables.
# They are smooth, partly conflicting, and only loosely mimic real trends.


def _opamp_gain(x):
    return 60.0 + 20.0 * np.tanh(2.0 * (x[0] + x[1] - x[2])) - 15.0 * np.sum((x[3:6] - 0.6) ** 2)


def _opamp_ugf(x):
    return 5.0 * np.exp(-2.0 * np.sum((x[4:9] - 0.3) ** 2)) + 0.5 * x[9]


def _opamp_pm(x):
    return 80.0 - 40.0 * (x[4] - 0.7) ** 2 - 25.0 * x[9] ** 2 + 5.0 * np.sin(3.0 * x[2])


OPAMP_FOM = FomSpec(
    metrics=(_opamp_gain, _opamp_ugf, _opamp_pm),
    weights=OPAMP_FOM_WEIGHTS,
    names=("GAIN", "UGF", "PM"),
)


def _classe_pae(x):
    return 0.6 * np.exp(-3.0 * np.sum((x[:6] - 0.4) ** 2)) + 0.1 * np.cos(4.0 * x[6])


def _classe_pout(x):
    return 1.5 * np.tanh(2.0 * np.mean(x[6:12])) - 0.8 * (x[0] - 0.8) ** 2


CLASSE_FOM = FomSpec(
    metrics=(_classe_pae, _classe_pout),
    weights=CLASSE_FOM_WEIGHTS,
    names=("PAE", "Pout"),
)


def _fom_objective(spec: FomSpec):
    def objective(x):
        return fom_evaluate(spec, x)

    return objective


def builtin_problems(duration_model=None) -> list[Problem]:
    """Registered benchmark problems, all sharing ``duration_model``.

    The default duration model is log-normal with median 10 s and
    ``sigma = 0.5``.
    """
    dm = LogNormalDuration() if duration_model is None else duration_model
    return [
        Problem(
            "branin",
            BoxDomain([-5.0, 0.0], [10.0, 15.0]),
            _negated(branin),
            dm,
            BRANIN_MAX,
            np.array([np.pi, 2.275]),
        ),
        Problem(
            "hartmann6",
            BoxDomain.unit(6),
            _negated(hartmann6),
            dm,
            HARTMANN6_MAX,
            HARTMANN6_ARGMAX,
        ),
        Problem("opamp_fom", BoxDomain.unit(10), _fom_objective(OPAMP_FOM), dm),
        Problem("classe_fom", BoxDomain.unit(12), _fom_objective(CLASSE_FOM), dm),
    ]


def get_problem(name: str, duration_model=None) -> Problem:
    for p in builtin_problems(duration_model):
        if p.name == name:
            return p
    names = [p.name for p in builtin_problems()]
    raise ValueError(f"unknown problem {name!r}; choose from {names}")


# name -> (metric, input dimension); building blocks for config-defined composites
METRICS = {
    "opamp.GAIN": (_opamp_gain, 10),
    "opamp.UGF": (_opamp_ugf, 10),
    "opamp.PM": (_opamp_pm, 10),
    "classe.PAE": (_classe_pae, 12),
    "classe.Pout": (_classe_pout, 12),
    "branin": (_negated(branin), 2),
    "hartmann6": (_negated(hartmann6), 6),
}


def custom_fom_problem(name, duration_model=None, *, metrics, weights, lower=None, upper=None):
    """Weighted composite of registered metrics over a common box.

    ``lower``/``upper`` default to the unit cube of the metrics' dimension.
    """
    try:
        parts = [METRICS[m] for m in metrics]
    except KeyError as exc:
        raise ValueError(f"unknown metric {exc.args[0]!r}; choose from {sorted(METRICS)}") from None
    dims = {d for _, d in parts}
    if len(dims) != 1:
        raise ValueError(f"metrics disagree on input dimension: {sorted(dims)}")
    dim = dims.pop()
    domain = BoxDomain(
        np.zeros(dim) if lower is None else lower,
        np.ones(dim) if upper is None else upper,
    )
    if domain.dim != dim:
        raise ValueError("bounds do not match the metric dimension")
    spec = FomSpec([f for f, _ in parts], list(weights), tuple(metrics))
    return Problem(name, domain, _fom_objective(spec), duration_model or LogNormalDuration())
