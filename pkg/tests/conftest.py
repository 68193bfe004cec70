import numpy as np
import pytest
from hypothesis import settings

from seagle.grid import Grid, SensorArray, SourceSpec, wavenumber
from seagle.model import ScatteringSetup

settings.register_profile("default", deadline=None, max_examples=25)
settings.load_profile("default")

LAMBDA = 74.9e-3
K = wavenumber(LAMBDA)


@pytest.fixture(scope="session")
def k_b():
    return K


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_setup():
    """16x16 grid, three point sources, a ring of 12 sensors."""
    grid = Grid((16, 16), 4.8e-3)
    sources = [SourceSpec.point((-0.12, 0.0), K), SourceSpec.point((0.0, -0.12), K),
               SourceSpec.point((0.1, 0.08), K)]
    sensors = SensorArray.ring(0.09, 12)
    return ScatteringSetup(grid, K, sources, sensors)


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
