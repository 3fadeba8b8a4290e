import numpy as np
import pytest

from striaflow.grid import GridSpec, dealias, to_spectral
from striaflow.dyadic import build_ladder


@pytest.fixture(scope="session")
def grid64():
    return GridSpec(n=64)


@pytest.fixture(scope="session")
def ladder64(grid64):
    return build_ladder(grid64)


def random_field(grid, rng, amplitude=1.0):
    """Band-limited real random field, the shape every dynamic field has."""
    vals = rng.standard_normal((grid.n, grid.n)) * amplitude
    return dealias(to_spectral(grid, vals))
