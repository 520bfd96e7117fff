import numpy as np
import pytest

from opinionlab.net import random_network


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_instance(rng, n_max=8, require_fj=True):
    """Random strongly connected network with random m (one entry positive) and gamma."""
    n = int(rng.integers(2, n_max + 1))
    net = random_network(n, rng)
    m = rng.uniform(0.05, 1.0, n) * (rng.random(n) < 0.6)
    if require_fj and not np.any(m > 0):
        m[rng.integers(n)] = rng.uniform(0.05, 1.0)
    gamma = rng.uniform(0.2, 1.0, n)
    return net, m, gamma
