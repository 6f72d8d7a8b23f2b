import numpy as np
import pytest

from aqade.cae import ModelSpec, build_model, random_weights


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_model(n_channels=3, seed=0):
    spec = ModelSpec(n_channels=n_channels)
    return build_model(spec, random_weights(spec, seed=seed))


@pytest.fixture
def model_rgb():
    return make_model(n_channels=3)


@pytest.fixture
def model_gray():
    return make_model(n_channels=1)
