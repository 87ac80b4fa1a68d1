import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from zygcomm.geometry import ZygmundRectangle
from zygcomm.kernels import get_kernel

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

UNIT = ((0.0, 1.0), (0.0, 1.0), (0.0, 1.0))


@pytest.fixture(scope="session")
def nw():
    return get_kernel("nagel-wainger")


@pytest.fixture(scope="session")
def cube():
    return ZygmundRectangle.from_bounds(UNIT)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
