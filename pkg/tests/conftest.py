import numpy as np
import pytest

from gfstack import _accel


@pytest.fixture
def numpy_backend(monkeypatch):
    """Force the pure-numpy kernels for the duration of a test."""
    monkeypatch.setattr(_accel, "USE_NUMBA", False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
