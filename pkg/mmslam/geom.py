"""
Geometry for mmWave multipath SLAM.

Coordinate frames, the channel-parameter measurement function, virtual-anchor
reflection, specular incidence points, back-projection of a channel-parameter
vector to a 3-D point and the surface-displacement compression of diffuse paths.

All functions are pure. Batched variants operate on the last axis of
(..., 3) arrays and are used by the filter on sigma points.
"""

import logging
from typing import Tuple

import numpy as np

from mmslam.models import ChannelParam, LandmarkState, LandmarkType, SurfaceSpec, VehicleState


logger = logging.getLogger(__name__)

# Relative tolerance for degenerate directions and denominators
EPS = 1e-12


class GeometryError(ValueError):
    """Raised for coincident points, degenerate or infeasible geometry."""


def rotation_z(angle: float) -> np.ndarray:
    """Rotation matrix about the z axis."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def reflect_bs(bs_position, surface: SurfaceSpec) -> np.ndarray:
    """
    Mirror the BS across a surface, giving its virtual anchor.

    Args:
        bs_position: BS position (3,)
        surface: reflecting plane

    Returns:
        np.ndarray: x_VA = x_BS - 2((x_BS - p)^T n) n
    """
    bs = np.asarray(bs_position, dtype=float)
    n = surface.unit_normal
    return bs - 2.0 * np.dot(bs - surface.point_on_plane, n) * n


def _angles(directions: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Azimuth and elevation of (..., 3) direction vectors."""
    norms = np.linalg.norm(directions, axis=-1)
    if np.any(norms < EPS):
        raise GeometryError("coincident points")
    unit = directions / np.expand_dims(norms, -1)
    azimuth = np.arctan2(unit[..., 1], unit[..., 0])
    elevation = np.arcsin(np.clip(unit[..., 2], -1.0, 1.0))
    return azimuth, elevation


def predict_channel(points, state: VehicleState, bs, is_los: bool = False) -> np.ndarray:
    """
    Batched measurement function h for (..., 3) scatter points.

    For LOS the points are BS positions; otherwise they are incidence or
    scatter points on a surface.

    Returns:
        np.ndarray: (..., 5) channel parameters [toa, aoa_az, aoa_el, aod_az, aod_el]
    """
    points = np.asarray(points, dtype=float)
    bs = np.asarray(bs, dtype=float)
    ue = state.position

    to_point = points - ue
    if is_los:
        toa = np.linalg.norm(to_point, axis=-1) + state.clock_bias
        departure = ue - points
    else:
        toa = np.linalg.norm(bs - points, axis=-1) + np.linalg.norm(to_point, axis=-1) + state.clock_bias
        departure = points - bs

    # Arrival direction in the vehicle frame: rotate by -heading
    arrival_local = to_point @ rotation_z(-state.heading).T
    aoa_az, aoa_el = _angles(arrival_local)
    aod_az, aod_el = _angles(departure)

    return np.stack([toa, aoa_az, aoa_el, aod_az, aod_el], axis=-1)


def measurement_model(point, state: VehicleState, bs, is_los: bool = False) -> ChannelParam:
    """
    Noise-free channel parameters of a single path.

    Args:
        point: scatter/incidence point, or the BS position for LOS
        state: vehicle state
        bs: BS position
        is_los: line-of-sight path flag

    Returns:
        ChannelParam: h(point, state)

    Raises:
        GeometryError: "coincident points" for a zero-length direction
    """
    return ChannelParam.from_array(predict_channel(point, state, bs, is_los=is_los))


def surface_frame(va, bs) -> Tuple[np.ndarray, np.ndarray]:
    """
    Point on the surface and displacement axis implied by a VA and the BS.

    The axis is the unit normal pointing from the BS side into the surface,
    so positive displacement means behind the surface as seen from the BS.
    Sign convention: the axis is (va - bs) / |va - bs|, the negative of the
    BS-facing normal (bs - va) / |bs - va|; surface_displacement already uses
    this sign, so callers must not flip it.

    Args:
        va: VA position(s) (..., 3)
        bs: BS position (3,)

    Returns:
        Tuple of (x_e, normal), each (..., 3)
    """
    va = np.asarray(va, dtype=float)
    bs = np.asarray(bs, dtype=float)
    offset = va - bs
    distance = np.linalg.norm(offset, axis=-1)
    if np.any(distance < EPS * max(1.0, float(np.max(np.abs(bs))))):
        raise GeometryError("degenerate geometry")
    return 0.5 * (bs + va), offset / np.expand_dims(distance, -1)


def incidence_point(va, ue, bs) -> np.ndarray:
    """
    Specular incidence point: intersection of the VA-UE line with the surface.

    Args:
        va: VA position(s) (..., 3)
        ue: vehicle position (3,)
        bs: BS position (3,)

    Returns:
        np.ndarray: incidence point(s) (..., 3)

    Raises:
        GeometryError: "degenerate geometry" when the UE lies on the plane
            through the VA parallel to the surface
    """
    va = np.asarray(va, dtype=float)
    ue = np.asarray(ue, dtype=float)
    x_e, normal = surface_frame(va, bs)

    to_ue = ue - va
    numerator = np.sum((x_e - va) * normal, axis=-1)
    denominator = np.sum(to_ue * normal, axis=-1)
    scale = np.maximum(np.linalg.norm(to_ue, axis=-1), 1.0)
    if np.any(np.abs(denominator) < EPS * scale):
        raise GeometryError("degenerate geometry")

    return va + np.expand_dims(numerator / denominator, -1) * to_ue


def specular_channel(va_points, state: VehicleState, bs) -> np.ndarray:
    """Channel parameters of the specular path for (..., 3) VA positions."""
    x0 = incidence_point(va_points, state.position, bs)
    return predict_channel(x0, state, bs, is_los=False)


def arrival_direction(z, state: VehicleState) -> np.ndarray:
    """Global-frame unit arrival direction(s) from the AOA of (..., 5) channel parameters."""
    z = np.asarray(z, dtype=float)
    az, el = z[..., 1], z[..., 2]
    local = np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=-1)
    return local @ rotation_z(state.heading).T


def backproject_cluster(cluster, state: VehicleState, bs) -> Tuple[np.ndarray, np.ndarray]:
    """
    Back-project every path of a cluster from its TOA and AOA.

    Returns:
        Tuple of (points (n, 3), feasible mask (n,)); infeasible rows are NaN
    """
    z = np.asarray(cluster, dtype=float).reshape(-1, 5)
    bs = np.asarray(bs, dtype=float)
    ue = state.position

    r = z[:, 0] - state.clock_bias
    q = bs - ue
    q_norm = np.linalg.norm(q)
    u = arrival_direction(z, state)

    denominator = r - u @ q
    with np.errstate(divide="ignore", invalid="ignore"):
        d2 = (r ** 2 - q_norm ** 2) / (2.0 * denominator)

    feasible = (r > q_norm * (1.0 + EPS)) & (denominator > EPS * max(q_norm, 1.0)) & np.isfinite(d2) & (d2 > 0)
    points = np.full((z.shape[0], 3), np.nan)
    points[feasible] = ue + d2[feasible, None] * u[feasible]
    return points, feasible


def backproject(z, state: VehicleState, bs) -> np.ndarray:
    """
    Back-project one channel-parameter vector to a 3-D point.

    Uses TOA and AOA only: p = x_UE + d2 u with
    d2 = (r^2 - |q|^2) / (2 (r - u^T q)), r = toa - B, q = x_BS - x_UE.

    Raises:
        GeometryError: "infeasible geometry" for non-positive or non-finite d2
    """
    points, feasible = backproject_cluster(np.asarray(z, dtype=float).reshape(1, 5), state, bs)
    if not feasible[0]:
        raise GeometryError("infeasible geometry")
    return points[0]


def displacement_of_points(points, va_points, bs) -> np.ndarray:
    """
    Surface displacements of back-projected points for one or many VA hypotheses.

    Args:
        points: back-projected points (L, 3)
        va_points: VA positions (N, 3) or (3,)
        bs: BS position (3,)

    Returns:
        np.ndarray: (N, L) displacements, or (L,) for a single VA
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    va_points = np.asarray(va_points, dtype=float)
    x_e, normal = surface_frame(np.atleast_2d(va_points), bs)
    d = normal @ points.T - np.sum(normal * x_e, axis=-1)[:, None]
    return d[0] if va_points.ndim == 1 else d


def surface_displacement(z, state: VehicleState, landmark: LandmarkState, bs) -> float:
    """
    Compressed diffuse measurement: signed distance of the back-projected point to the surface.

    Args:
        z: channel parameters of a diffuse path
        state: vehicle state
        landmark: surface landmark (type other than BS)
        bs: BS position

    Returns:
        float: displacement in meters, positive behind the surface

    Raises:
        GeometryError: for a BS landmark or when back-projection fails
    """
    if landmark.type == LandmarkType.BS:
        raise GeometryError("degenerate geometry")
    x_hat = backproject(z, state, bs)
    return float(displacement_of_points(x_hat, landmark.va_position, bs)[0])
