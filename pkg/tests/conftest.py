import numpy as np
import pytest

from nlslab.grid import Params, make_grid
from nlslab.ground_state import synthesized_ground_state


@pytest.fixture(scope="session")
def grid():
    return make_grid(20.0, 1024)


@pytest.fixture(scope="session")
def small_grid():
    return make_grid(20.0, 256)


@pytest.fixture(scope="session")
def Z2(grid):
    return synthesized_ground_state(Params(1.0, 2.0), grid).profile


@pytest.fixture(scope="session")
def Z3(grid):
    return synthesized_ground_state(Params(1.0, 3.0), grid).profile


@pytest.fixture(scope="session")
def P2():
    return Params(1.0, 2.0)


@pytest.fixture(scope="session")
def P3():
    return Params(1.0, 3.0)


def sech(x):
    return 1.0 / np.cosh(x)
