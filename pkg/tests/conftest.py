import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from easybo.gp import Dataset, KernelHyperparams  # noqa: E402


def random_problem(rng, n, d, noise=None):
    """Random dataset and moderately conditioned hyperparameters."""
    X = rng.uniform(size=(n, d))
    y = rng.normal(size=n) * rng.uniform(0.1, 10) + rng.uniform(-5, 5)
    h = KernelHyperparams(
        rng.uniform(0.1, 1.0, size=d),
        float(rng.uniform(0.5, 2.0)),
        float(np.exp(rng.uniform(np.log(1e-3), np.log(1e-1)))) if noise is None else noise,
    )
    return Dataset(X, y), h


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
