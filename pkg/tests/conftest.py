import pytest

from youla_ilc.reference import SAMPLE_TIME, published_tf
from youla_ilc.synthesis import synthesize

TS = SAMPLE_TIME


@pytest.fixture(scope="session")
def plant():
    return published_tf("P", TS)


@pytest.fixture(scope="session")
def target():
    return published_tf("Gc", TS)


@pytest.fixture(scope="session")
def design(plant, target):
    return synthesize(plant, target)


@pytest.fixture(scope="session")
def design_no_d(plant, target):
    return synthesize(plant, target, d_cutoff_hz=None)
