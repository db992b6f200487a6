import numpy as np
import pytest

from sephydro.domain import build_domain
from sephydro.process import ProcessParams


@pytest.fixture(scope="session")
def small_1d():
    return build_domain(1, 1, 3)  # interior {±2, ±3}, boundary {±1}


@pytest.fixture(scope="session")
def small_2d():
    return build_domain(2, 2, 10)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20250810)


@pytest.fixture
def params_m1():
    return ProcessParams(m=1, alpha=1.0)


@pytest.fixture
def params_m2():
    return ProcessParams(m=2, alpha=0.6)
