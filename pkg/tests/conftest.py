import numpy as np
import pytest

from chaosmoother.geo import GeoParams, geo_point
from chaosmoother.models import get_preset, lorenz63_from_xyz


@pytest.fixture(scope="session")
def l63():
    return get_preset("lorenz63-classical")


@pytest.fixture(scope="session")
def l63_paper():
    return get_preset("lorenz63-paper")


@pytest.fixture(scope="session")
def l96():
    return get_preset("lorenz96-d5")


@pytest.fixture(scope="session")
def u63(l63):
    return lorenz63_from_xyz([1.0, 2.0, 3.0], l63.meta["params"])


@pytest.fixture(scope="session")
def geo_params():
    return GeoParams()


@pytest.fixture(scope="session")
def geo_u(geo_params):
    return geo_point(0.3, 0.1, 0.2, geo_params)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
