import math

import numpy as np
import pytest

from emlab.model import PhysicalConstants
from emlab.spectral import GridSpec


@pytest.fixture(scope="session")
def grid16():
    return GridSpec(16, 2.0 * math.pi)


@pytest.fixture(scope="session")
def grid32():
    return GridSpec(32, 2.0 * math.pi)


@pytest.fixture(scope="session")
def grid32_wide():
    return GridSpec(32, 8.0 * math.pi)


@pytest.fixture(scope="session")
def constants_b0():
    return PhysicalConstants(b_infty=(0.0, 0.0, 0.0))


@pytest.fixture(scope="session")
def constants_bz():
    return PhysicalConstants(b_infty=(0.0, 0.0, 1.0))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
