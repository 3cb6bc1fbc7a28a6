"""
Shared domain types for mmslam.

Vehicle state, surfaces, landmarks and channel-parameter vectors used by the
geometry, simulator, likelihood and filter modules.
"""

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np


class LandmarkType(str, Enum):
    """Landmark source type: the base station or a surface roughness class."""

    BS = "BS"
    SM = "SM"
    MR = "MR"
    VR = "VR"

    @property
    def index(self) -> int:
        return LANDMARK_TYPES.index(self)


# Fixed order used for per-type arrays (weights, means, covariances)
LANDMARK_TYPES = (LandmarkType.BS, LandmarkType.SM, LandmarkType.MR, LandmarkType.VR)
SURFACE_TYPES = (LandmarkType.SM, LandmarkType.MR, LandmarkType.VR)


def wrap_angle(angle):
    """Wrap an angle (scalar or array) to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(angle, dtype=float), 2.0 * np.pi)


@dataclass(frozen=True)
class VehicleState:
    """
    7-D vehicle state.

    Attributes:
        position: 3-D position in meters
        heading: heading in radians, wrapped to (-pi, pi]
        speed: speed in m/s (non-negative)
        turn_rate: turn rate in rad/s
        clock_bias: clock bias pre-multiplied by c, in meters
    """

    position: np.ndarray
    heading: float
    speed: float
    turn_rate: float
    clock_bias: float

    def __post_init__(self):
        position = np.asarray(self.position, dtype=float).reshape(3)
        object.__setattr__(self, "position", position)
        object.__setattr__(self, "heading", float(wrap_angle(self.heading)))
        object.__setattr__(self, "speed", float(self.speed))
        object.__setattr__(self, "turn_rate", float(self.turn_rate))
        object.__setattr__(self, "clock_bias", float(self.clock_bias))

        if self.speed < 0:
            raise ValueError(f"speed must be non-negative, got {self.speed}")
        if not np.all(np.isfinite(self.to_vector())):
            raise ValueError("vehicle state contains non-finite values")

    def to_vector(self) -> np.ndarray:
        """Return [x, y, z, heading, speed, turn_rate, clock_bias]."""
        return np.concatenate(
            [self.position, [self.heading, self.speed, self.turn_rate, self.clock_bias]]
        )

    @classmethod
    def from_vector(cls, vector: Sequence[float]) -> "VehicleState":
        v = np.asarray(vector, dtype=float)
        if v.shape != (7,):
            raise ValueError(f"vehicle state vector must have 7 entries, got shape {v.shape}")
        return cls(position=v[:3], heading=v[3], speed=v[4], turn_rate=v[5], clock_bias=v[6])


@dataclass(frozen=True)
class SurfaceSpec:
    """Ground-truth reflecting surface: an infinite plane with a roughness type."""

    point_on_plane: np.ndarray
    unit_normal: np.ndarray
    surface_type: LandmarkType

    def __post_init__(self):
        point = np.asarray(self.point_on_plane, dtype=float).reshape(3)
        normal = np.asarray(self.unit_normal, dtype=float).reshape(3)
        object.__setattr__(self, "point_on_plane", point)
        object.__setattr__(self, "unit_normal", normal)
        object.__setattr__(self, "surface_type", LandmarkType(self.surface_type))

        if abs(np.linalg.norm(normal) - 1.0) > 1e-12:
            raise ValueError(f"surface normal must be unit length, got norm {np.linalg.norm(normal)}")
        if self.surface_type == LandmarkType.BS:
            raise ValueError("a surface cannot have type BS")


@dataclass(frozen=True)
class LandmarkState:
    """Filter-side landmark: VA position (BS position for type BS) and type."""

    va_position: np.ndarray
    type: LandmarkType

    def __post_init__(self):
        object.__setattr__(self, "va_position", np.asarray(self.va_position, dtype=float).reshape(3))
        object.__setattr__(self, "type", LandmarkType(self.type))


class ChannelParam(NamedTuple):
    """
    One channel-parameter vector z = [toa, aoa_az, aoa_el, aod_az, aod_el].

    toa is range-equivalent (meters); AOA angles are in the vehicle frame,
    AOD angles in the global (BS) frame.
    """

    toa: float
    aoa_az: float
    aoa_el: float
    aod_az: float
    aod_el: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "ChannelParam":
        v = np.asarray(values, dtype=float).reshape(5)
        return cls(*(float(x) for x in v))


# Indices of the angular components inside a channel-parameter vector
AZIMUTH_COMPONENTS = (1, 3)
ANGLE_COMPONENTS = (1, 2, 3, 4)


def as_cluster(cluster) -> np.ndarray:
    """Return a cluster of channel parameters as an (n, 5) float array."""
    array = np.asarray(cluster, dtype=float)
    if array.size == 0:
        return np.zeros((0, 5))
    return array.reshape(-1, 5)


def channel_residual(measured, predicted) -> np.ndarray:
    """Difference of channel-parameter vectors with azimuths wrapped to (-pi, pi]."""
    diff = np.asarray(measured, dtype=float) - np.asarray(predicted, dtype=float)
    diff = np.array(diff, dtype=float, copy=True)
    for component in AZIMUTH_COMPONENTS:
        diff[..., component] = wrap_angle(diff[..., component])
    return diff
