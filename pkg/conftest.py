"""pytest fixtures for simplified testing."""

import pytest

from layered_mie_design.dataset import (fit_normalizer, generate_dataset,
                                        split_dataset)
from layered_mie_design.materials import default_materials
from layered_mie_design.oracle import SpectralGrid
from layered_mie_design.surrogate import Architecture, init_network

# pylint: disable=invalid-name, redefined-outer-name


def pytest_addoption(parser):
    parser.addoption('--runslow',
                     action='store_true',
                     default=False,
                     help='run the long reproduction tests')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope='session')
def materials():
    """Default constant SiO2 / TiO2 tables"""
    return default_materials()


@pytest.fixture(scope='session')
def small_grid():
    """Coarse 20 point grid over the default range"""
    return SpectralGrid(400.0, 800.0, 20)


@pytest.fixture(scope='session')
def tiny_dataset(materials, small_grid):
    """60 three-layer records on the coarse grid"""
    return generate_dataset(60, 3, small_grid, materials, seed=11)


@pytest.fixture(scope='session')
def tiny_splits(tiny_dataset):
    return split_dataset(tiny_dataset, (0.8, 0.1, 0.1), seed=3)


@pytest.fixture
def tiny_model(tiny_dataset, tiny_splits):
    """Small untrained tcnn with a normalizer fitted on the tiny train split"""
    arch = Architecture('tcnn', 3, tiny_dataset.manifest.grid.n_points,
                        hidden_layers=2, hidden_width=8)
    return init_network(arch,
                        5,
                        normalizer=fit_normalizer(tiny_splits[0]),
                        manifest=tiny_dataset.manifest)

