import numpy as np
import pytest

from affinet.domain import Geometry, Params


@pytest.fixture
def geometry():
    return Geometry()


@pytest.fixture
def base_params():
    """The reference parameter set used throughout the experiments."""
    return Params(alpha=1.0, beta0=1.0, A_f=1.0, a_f=0.1, sigma=0.01)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
