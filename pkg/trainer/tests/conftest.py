import numpy as np
import pytest

from aqade_trainer.data import synthetic_images


@pytest.fixture
def rng():
    return np.random.default_rng(99)


@pytest.fixture(scope="session")
def blob_images():
    return synthetic_images(24, channels=1, seed=3)
