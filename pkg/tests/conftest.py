import numpy as np
import pytest


def random_density_matrix(dim, rng, rank=None):
    """Generic full-rank (or given-rank) random mixed state."""
    rank = rank or dim
    a = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
