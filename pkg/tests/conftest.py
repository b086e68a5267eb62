import numpy as np
import pytest

from mutualcover.probcore import build_joint


def make_joint(rng, nu, nv, zero_frac=0.2):
    while True:
        x = rng.dirichlet(np.ones(nu * nv)).reshape(nu, nv)
        x[rng.random((nu, nv)) < zero_frac] = 0.0
        if x.sum(axis=1).all() and x.sum(axis=0).all():
            return build_joint(x / x.sum())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
