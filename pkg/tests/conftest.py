"""Shared fixtures for the test suite."""
from __future__ import annotations

import numpy as np
import pytest

from ordpose.synth import default_camera, default_distribution, generate_dataset


@pytest.fixture(scope="session")
def dist():
    return default_distribution()


@pytest.fixture(scope="session")
def cam():
    return default_camera()


@pytest.fixture(scope="session")
def pose_bank(dist):
    """A small reusable set of synthetic poses."""
    return generate_dataset(dist, 50, seed=1234)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
