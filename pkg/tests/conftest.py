"""
Pytest fixtures: the packaged configuration extended with small test presets, and laboratories built from them.
"""

import os

import pytest
from omegaconf import OmegaConf

import main
from experiments._base import Laboratory
from utils import utils

RESOURCES = os.path.join(os.path.dirname(__file__), "resources")


def load_test_config():
    return OmegaConf.merge(
        OmegaConf.load(utils.CONFIG_PATH), OmegaConf.load(os.path.join(RESOURCES, "test_config.yaml"))
    )


def load_preset(name: str, **overrides):
    """
    Loads a preset against the test configuration outside of the function-scoped patch.
    """
    config = load_test_config()
    with pytest.MonkeyPatch.context() as mp:
        mp.setattr(utils, "get_config", lambda *args, **kwargs: config)
        return utils.load_config(name, overrides)


@pytest.fixture(autouse=True)
def patch_get_config(monkeypatch, request):
    """
    Automatically patch get_config for all tests except those starting with 'test_get_config'.
    """
    if request.node.name.startswith("test_get_config"):
        yield
        return
    config = load_test_config()
    monkeypatch.setattr(utils, "get_config", lambda *args, **kwargs: config)
    monkeypatch.setattr(main, "get_config", lambda *args, **kwargs: config)
    yield


@pytest.fixture(scope="module")
def tiny_config():
    return load_preset("tiny-1d")


@pytest.fixture(scope="module")
def layered_config():
    return load_preset("tiny-layered")


@pytest.fixture(scope="module")
def config_2d():
    return load_preset("tiny-2d")


@pytest.fixture(scope="module")
def constant_lab(tiny_config):
    """Constant speed on [−1.2, 2.2], Θ = [0, 1], T = 0.5."""
    return Laboratory.from_config(tiny_config)


@pytest.fixture(scope="module")
def layered_lab(layered_config):
    """Speeds 1 | 2 | 0.5 with interfaces at 0.5 and 0.8, Θ = [0, 1.6], T = 0.5."""
    return Laboratory.from_config(layered_config)


@pytest.fixture(scope="module")
def lab_2d(config_2d):
    return Laboratory.from_config(config_2d)
