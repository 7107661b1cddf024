import numpy as np
import pytest

from prymtau.curve_model import HyperellipticCurve, NDifferential

G2_ROOTS = (0.1, 1.2j, -1.0, 1.5, -0.7 - 0.8j, 0.9 - 1.0j)
Q_ROOTS = (-1.8 + 0.3j, 0.4 + 1.7j, 0.3 + 0.2j)


@pytest.fixture(scope="session")
def curve2():
    return HyperellipticCurve.from_roots(G2_ROOTS)


@pytest.fixture(scope="session")
def w22(curve2):
    return NDifferential.from_roots(curve2, 2, [0.3 + 0.2j, -1.8 + 0.3j])


@pytest.fixture(scope="session")
def w23(curve2):
    return NDifferential.from_roots(curve2, 3, Q_ROOTS)


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)
