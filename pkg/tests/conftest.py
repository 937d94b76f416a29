import numpy as np
import pytest

from innerspeech.core import Epoch, EpochSet, make_channels


@pytest.fixture
def montage6():
    return make_channels(["F3", "F4", "C3", "C4", "P3", "P4"])


@pytest.fixture
def small_set(montage6):
    rng = np.random.default_rng(7)
    epochs = tuple(
        Epoch(data=rng.standard_normal((6, 128)), label=i % 2)
        for i in range(8)
    )
    return EpochSet(epochs=epochs, sampling_rate_hz=254.0,
                    class_names=("rest", "action"), channels=montage6,
                    subject_id="s1")


@pytest.fixture
def blobs4():
    """Four well-separated Gaussian blobs, 40 points each."""
    rng = np.random.default_rng(1)
    centers = np.array([[0.0, 0.0], [5.0, 0.0], [0.0, 5.0], [5.0, 5.0]])
    X = np.vstack([c + 0.3 * rng.standard_normal((40, 2)) for c in centers])
    y = np.repeat(np.arange(4), 40)
    return X, y
