"""Shared test fixtures and configuration."""

import numpy as np
import pytest
import torch

from fusedet.application.services.selftest_service import (
    TINY_CLASSES,
    TINY_RANGE,
    tiny_detector,
    tiny_generator_settings,
)
from fusedet.domain import Box3D, BoxNormalizer
from fusedet.domain.services import make_schedule
from fusedet.infrastructure import InMemorySceneRepository, generate_scene

KITTI_RANGE = (2.0, -30.08, -3.0, 46.8, 30.08, 1.0)
KITTI_MAX_SIZE = (10.0, 4.0, 4.0)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="Run slow tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


# ============= Domain Fixtures =============


@pytest.fixture
def unit_cube():
    """Unit cube at the origin."""
    return Box3D(0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0)


@pytest.fixture
def kitti_normalizer():
    """Normalizer over the KITTI car range."""
    return BoxNormalizer.from_point_cloud_range(KITTI_RANGE, KITTI_MAX_SIZE)


@pytest.fixture
def cosine_schedule():
    """1000-step cosine schedule."""
    return make_schedule("cosine", 1000)


@pytest.fixture
def linear_schedule():
    """1000-step linear schedule."""
    return make_schedule("linear", 1000)


@pytest.fixture
def generator():
    """Seeded torch generator."""
    return torch.Generator().manual_seed(0)


# ============= Model Fixtures =============


@pytest.fixture
def tiny():
    """Tiny float64 detector with its normalizer and voxelizer."""
    torch.manual_seed(0)
    return tiny_detector()


@pytest.fixture
def tiny_settings():
    """Generator settings for the tiny grid."""
    return tiny_generator_settings()


@pytest.fixture
def tiny_scene(tiny_settings):
    """One generated scene on the tiny grid."""
    return generate_scene(tiny_settings, np.random.default_rng(0), "000000")


@pytest.fixture
def tiny_repository(tiny_settings):
    """Four generated scenes held in memory."""
    return InMemorySceneRepository(
        [generate_scene(tiny_settings, np.random.default_rng(i), f"{i:06d}") for i in range(4)]
    )


@pytest.fixture
def tiny_classes():
    return TINY_CLASSES


@pytest.fixture
def tiny_range():
    return TINY_RANGE


# ============= Mock Fixtures =============


class FakeClock:
    """Fake clock for latency measurements."""

    def __init__(self, start_time: float = 0.0, step: float = 0.0):
        self._time = start_time
        self._step = step

    def now(self) -> float:
        value = self._time
        self._time += self._step
        return value

    def advance(self, seconds: float) -> None:
        self._time += seconds


@pytest.fixture
def fake_clock():
    """Fake clock starting at 0."""
    return FakeClock()


@pytest.fixture
def ticking_clock():
    """Fake clock that advances 0.5 s on every read."""
    return FakeClock(step=0.5)
