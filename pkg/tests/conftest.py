import numpy as np
import pytest

from sievecred import generate_truth, make_family


@pytest.fixture(scope="session")
def reg500():
    return make_family("regression", n=500)


@pytest.fixture(scope="session")
def classif500():
    return make_family("classification", n=500)


@pytest.fixture(scope="session")
def hist_family():
    return make_family("histogram")


@pytest.fixture(scope="session")
def loglin_family():
    return make_family("loglinear")


@pytest.fixture(scope="session")
def truth_b1():
    return generate_truth("self_similar", beta=1.0, seed=11)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260808)
