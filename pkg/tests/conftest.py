import numpy as np
import pytest

from qdmod.qcore import Config


@pytest.fixture(scope="session")
def cfg():
    return Config(tau=0.13 + 1.0j, prec=64, tol=1e-10)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240809)
