import numpy as np
import pytest

from app.schemas import ProblemFrame


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow oracle refinements")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def frame3():
    return ProblemFrame(n=3, k0=3)


@pytest.fixture
def frame4():
    return ProblemFrame(n=4, k0=3)
