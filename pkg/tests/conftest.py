import numpy as np
import pytest

from swlp.presets import scalar_system
from swlp.stochastics import TimeGrid, sample_brownian


@pytest.fixture
def grid():
    return TimeGrid(1.0, 64)


@pytest.fixture
def ou():
    """OU preset: a = -1, sigma = 0.5 on 256 steps."""
    return scalar_system(sigma=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_ens(grid):
    return sample_brownian(grid, 500, seed=7)
