import numpy as np
import pytest

from periplate import PlateProfile, ReferenceSlab, build_interleaved_basis


@pytest.fixture(scope="session")
def grid():
    return ReferenceSlab(nx=32, nz=20)


@pytest.fixture(scope="session")
def basis8(grid):
    return build_interleaved_basis(8, PlateProfile.zero(2), grid, kappa=0.5)


def random_profile(rng, k_max, amplitude, mean=0.0):
    return PlateProfile(mean, rng.uniform(-amplitude, amplitude, size=(k_max, 2)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
