"""
Shared fixtures. Puts src/ on sys.path the same way the scripts do.
"""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import flux as fx  # noqa: E402
import potentials as pot  # noqa: E402
import profiles  # noqa: E402
from grid import Grid1D  # noqa: E402

EXP1_JUMPS = (-3.4, -2.0, -0.5, 0.8, 2.2, 3.2)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run the long experiment reproductions")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def quartic():
    return pot.quartic()


@pytest.fixture
def euclidean():
    return fx.FluxModel(fx.EUCLIDEAN)


@pytest.fixture
def minkowski():
    return fx.FluxModel(fx.MINKOWSKI)


@pytest.fixture
def linear():
    return fx.FluxModel(fx.LINEAR)


@pytest.fixture
def exp1_pattern():
    return profiles.make_pattern(-4.0, 4.0, EXP1_JUMPS, first_sign=-1)


@pytest.fixture
def exp1_grid():
    return Grid1D(-4.0, 4.0, 1600)


@pytest.fixture
def euclidean_table(quartic, euclidean):
    return profiles.cached_profile_table(quartic, euclidean, 0.1)


@pytest.fixture
def minkowski_table(quartic, minkowski):
    return profiles.cached_profile_table(quartic, minkowski, 0.1)
