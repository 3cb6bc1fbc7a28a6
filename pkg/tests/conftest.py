import numpy as np
import pytest

from mmslam.config import default_scenario
from mmslam.models import LandmarkState, LandmarkType, SurfaceSpec, VehicleState


global_seed = 20240611


@pytest.fixture
def rng():
    return np.random.default_rng(global_seed)


@pytest.fixture
def scenario():
    return default_scenario()


@pytest.fixture
def environment(scenario):
    return scenario.environment()


@pytest.fixture
def bs(scenario):
    return np.asarray(scenario.bs_position, dtype=float)


@pytest.fixture
def truth_state(scenario):
    return scenario.truth_state()


@pytest.fixture
def landmarks(environment):
    """BS, SM (x = 80), MR (x = -80), MR (y = 80), VR (y = -80)."""
    return environment.landmarks()


def make_state(position, heading=0.0, speed=0.0, turn_rate=0.0, clock_bias=0.0):
    return VehicleState(np.asarray(position, dtype=float), heading, speed, turn_rate, clock_bias)


def wall(x=None, y=None, surface_type=LandmarkType.MR):
    if x is not None:
        return SurfaceSpec([x, 0.0, 0.0], [np.sign(x), 0.0, 0.0], surface_type)
    return SurfaceSpec([0.0, y, 0.0], [0.0, np.sign(y), 0.0], surface_type)


def landmark_of(landmarks, landmark_type):
    return next(lm for lm in landmarks if lm.type == landmark_type)


def surface_landmark(va, landmark_type):
    return LandmarkState(np.asarray(va, dtype=float), landmark_type)
