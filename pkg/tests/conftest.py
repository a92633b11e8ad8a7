import numpy as np
import pytest

from familygen import Generator, arclength_map, build_pair, make_gapped_curve
from fungrid import SampledFunction, UniformGrid

SWEEP_LAMBDAS = tuple(round(0.1 * i, 10) for i in range(8))


@pytest.fixture(scope="session")
def grid():
    return UniformGrid(4096)


@pytest.fixture(scope="session")
def circle_theta(grid):
    return SampledFunction.from_callable(lambda t: t, grid)


@pytest.fixture(scope="session")
def circle_phi(grid):
    return SampledFunction.from_callable(lambda t: np.sin(2 * t), grid)


@pytest.fixture(scope="session")
def gapped_curve():
    return make_gapped_curve(3, 4, seed=7)


@pytest.fixture(scope="session")
def gapped_map(gapped_curve):
    return arclength_map(gapped_curve, 4096)


@pytest.fixture(scope="session")
def gapped_pair(gapped_curve, gapped_map):
    return build_pair(gapped_curve, gapped_map, 4, Generator.parse("exp+2x"))
