import numpy as np
import pytest

from axtlab.grid import SinoGeometry
from axtlab.phantoms import DiskField, GaussianField, ZeroField


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def disk():
    return DiskField(radius=1.0)


@pytest.fixture(scope="session")
def moll_disk():
    return DiskField(radius=1.0, mollify_width=0.05)


@pytest.fixture(scope="session")
def zero_field():
    return ZeroField()


@pytest.fixture(scope="session")
def small_geom():
    return SinoGeometry(101, 24, np.pi)


@pytest.fixture(scope="session")
def smooth_pair():
    a = GaussianField(center=(0.1, -0.05), sigma=0.45, amplitude=0.6)
    f = GaussianField(center=(-0.1, 0.2), sigma=0.5, amplitude=1.0)
    return a, f
