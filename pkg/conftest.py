import os

import pytest

from hft_kinetics.core import RngStream, validate_config

ROOT = os.path.dirname(os.path.abspath(__file__))


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run full-size experiments')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return RngStream(12345)


@pytest.fixture
def small_params():
    """A small microsim parameter map that runs in well under a second"""
    return {
        'N': 6,
        'L_star': 10.0,
        'dp_star': 4.0,
        'dz_star': 3.0,
        'sigma': 1.0,
        'n_transactions': 300,
        'seed': 7,
        'warmup_transactions': 30,
    }


@pytest.fixture
def small_config(small_params):
    return validate_config(small_params)


@pytest.fixture
def recipes_dir():
    return os.path.join(ROOT, 'recipes')
