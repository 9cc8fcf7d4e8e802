import numpy as np
import pytest

from renvar.asymptotics import ParameterVectors
from renvar.moments import build_lag_design, sample_autocovariances
from renvar.simulate import generate_true_parameters, simulate_var


@pytest.fixture
def make_dataset():
    """Factory: true parameters plus one simulated sample and its moment set."""

    def build(d, u, p, q, t, seed=0, family="normal"):
        params = generate_true_parameters(d, u, p, q, seed=seed)
        data, presample = simulate_var(params, t, family, seed=seed + 1000)
        design = build_lag_design(data, p, presample=presample)
        return params, design, sample_autocovariances(design)

    return build


@pytest.fixture
def make_pv():
    """Factory: a random population parameter point with its implied moments."""

    def build(d, u, p, q, seed=0):
        params = generate_true_parameters(d, u, p, q, seed=seed)
        return ParameterVectors.from_true(params)

    return build


@pytest.fixture
def spd():
    def build(rng, n, jitter=0.5):
        a = rng.standard_normal((n, n))
        return a @ a.T + (jitter + n) * np.eye(n)

    return build


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
