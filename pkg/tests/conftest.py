import numpy as np
import pytest

from zrlab import rates
from zrlab.harness import grand_canonical


@pytest.fixture(scope="session")
def gc_identity():
    return grand_canonical(rates.identity())


@pytest.fixture(scope="session")
def gc_ratio():
    return grand_canonical(rates.bounded_ratio())


@pytest.fixture(scope="session")
def gc_sqrt():
    return grand_canonical(rates.power(0.5))


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
