# -*- coding: utf-8 -*-

import numpy as np
import pytest
import torch

from pyCountMamba.data import SynthConfig, gen_synthetic, write_dataset


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help="run long training experiments")


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip)


@pytest.fixture(autouse=True)
def seeded():
    torch.manual_seed(0)
    np.random.seed(0)
    torch.set_default_dtype(torch.float32)
    torch.set_num_threads(1)
    yield
    torch.set_default_dtype(torch.float32)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_synth():
    return SynthConfig(image_size=16, count_min=0, count_max=3, seed=3)


@pytest.fixture
def tiny_dataset(tmp_path, tiny_synth):
    path = str(tmp_path / 'data')
    write_dataset(path, gen_synthetic(tiny_synth, 4), tiny_synth)
    return path
