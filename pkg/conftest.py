import numpy as np
import pytest

from pyemac.mesh import build_uniform_tri_mesh
from pyemac.space import TaylorHoodSpace


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run desk-scale benchmark tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale benchmark runs, skipped without --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(20251018)


@pytest.fixture(scope="session")
def unit_space():
    return TaylorHoodSpace(build_uniform_tri_mesh(4, 4))


@pytest.fixture(scope="session")
def space8():
    return TaylorHoodSpace(build_uniform_tri_mesh(8, 8))
