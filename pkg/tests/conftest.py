import numpy as np
import pytest

from calderon_hardy import Cube, Grid, GridFunction


@pytest.fixture
def line():
    """``[-4, 4]`` with ``h = 1/32``."""
    return Grid(Cube((0.0,), 8.0), 256)


@pytest.fixture
def square():
    return Grid(Cube((0.0, 0.0), 4.0), 64)


def from_func(grid, func):
    return GridFunction.from_callable(grid, func)


def rng(seed=0):
    return np.random.default_rng(seed)
