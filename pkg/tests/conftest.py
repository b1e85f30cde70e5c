import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_simplex(rng, n, k, concentration=1.0):
    """Interior simplex rows (Dirichlet draws, bounded away from 0)."""
    q = rng.dirichlet(np.full(k, concentration), size=n)
    q = np.clip(q, 1e-12, None)
    return q / q.sum(axis=1, keepdims=True)
