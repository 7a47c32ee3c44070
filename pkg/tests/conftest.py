import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fracgraph.graph import Coefficients, StarGraph

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

LENGTHS = (1.0, 0.8, 1.2)


def smooth_gamma(x, k):
    return 1.0 + 0.3 * np.sin(np.pi * x + k)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def star3():
    return StarGraph.uniform(LENGTHS, 32)


@pytest.fixture
def coeff3(star3):
    return Coefficients.from_function(star3, smooth_gamma)
