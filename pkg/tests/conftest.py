import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kslab.domain import Field, Grid

settings.register_profile("kslab", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("kslab")


@pytest.fixture
def grid256():
    return Grid.interval(1.0, 256)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def cos_mode(grid, k=1):
    x = grid.centers(0)
    return Field(grid, np.cos(np.pi * k * x / grid.extents[0]))
