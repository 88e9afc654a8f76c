import numpy as np
import pytest

from rtsep import ModelConfig, build_model, random_init

TINY = ModelConfig(base_channels=4, freq_bins=64, sources=2, path_repeats=1)


@pytest.fixture(scope="session")
def default_config():
    return ModelConfig()


@pytest.fixture(scope="session")
def default_model(default_config):
    ws = random_init(default_config, seed=11)
    return build_model(ws.config, ws.as_dict())


@pytest.fixture(scope="session")
def tiny_config():
    return TINY


@pytest.fixture(scope="session")
def tiny_model(tiny_config):
    ws = random_init(tiny_config, seed=7)
    return build_model(ws.config, ws.as_dict())


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
