"""
Statistical channel-parameter simulator.

Generates, per landmark and time step, a cluster of channel-parameter vectors
following the per-type statistics (path count, biased specular path, diffuse
scatter displaced from the surface), plus Poisson singleton clutter. The
output of one step is a scan: a randomly ordered list of clusters.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import stats

from mmslam import geom
from mmslam.models import (
    AZIMUTH_COMPONENTS,
    LandmarkState,
    LandmarkType,
    SurfaceSpec,
    VehicleState,
    as_cluster,
    wrap_angle,
)


logger = logging.getLogger(__name__)

DEFAULT_LATERAL_SPREAD = 2.0


@dataclass(frozen=True)
class CardinalityModel:
    """
    Path-count distribution of a cluster.

    kind "dirac" puts all mass on `shift`; kind "shifted_geometric" is
    shift + G with P(G = n) = (1 - p)^n p, n >= 0.
    """

    kind: str
    shift: int
    p: float = 1.0

    def __post_init__(self):
        if self.kind not in ("dirac", "shifted_geometric"):
            raise ValueError(f"Unknown cardinality kind: {self.kind}")
        if self.shift < 0:
            raise ValueError(f"cardinality shift must be non-negative, got {self.shift}")
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"geometric parameter must lie in (0, 1], got {self.p}")

    def log_pmf(self, n: int) -> float:
        if self.kind == "dirac":
            return 0.0 if n == self.shift else -np.inf
        # scipy's geom starts at 1; loc moves the support to start at shift
        return float(stats.geom.logpmf(n, self.p, loc=self.shift - 1))

    def pmf(self, n: int) -> float:
        return float(np.exp(self.log_pmf(n)))

    def sample(self, rng: np.random.Generator) -> int:
        if self.kind == "dirac":
            return self.shift
        return int(stats.geom.rvs(self.p, loc=self.shift - 1, random_state=rng))


@dataclass(frozen=True)
class TypeStatistics:
    """
    Per-type cluster statistics.

    Attributes:
        cardinality: path-count distribution
        specular_bias: 5-vector added to the geometric specular parameters
        specular_std: per-component standard deviations (covariance is diagonal)
        diffuse_mean: mean surface displacement of diffuse paths (meters)
        diffuse_std: standard deviation of the displacement (meters)
        lateral_spread: in-plane scatter of diffuse points (simulator only)
    """

    cardinality: CardinalityModel
    specular_bias: np.ndarray
    specular_std: np.ndarray
    diffuse_mean: Optional[float] = None
    diffuse_std: Optional[float] = None
    lateral_spread: float = DEFAULT_LATERAL_SPREAD

    def __post_init__(self):
        object.__setattr__(self, "specular_bias", np.asarray(self.specular_bias, dtype=float).reshape(5))
        object.__setattr__(self, "specular_std", np.asarray(self.specular_std, dtype=float).reshape(5))

    @property
    def specular_cov(self) -> np.ndarray:
        return np.diag(self.specular_std ** 2)

    @property
    def has_diffuse(self) -> bool:
        return self.diffuse_mean is not None


def default_statistics(landmark_type: LandmarkType) -> TypeStatistics:
    """
    Fitted statistics of the ESPRIT channel estimator for one source type.

    Args:
        landmark_type: BS, SM, MR or VR

    Returns:
        TypeStatistics: cardinality, specular bias/covariance and diffuse displacement model
    """
    landmark_type = LandmarkType(landmark_type)
    angles = np.ones(4)

    if landmark_type == LandmarkType.BS:
        return TypeStatistics(
            cardinality=CardinalityModel("dirac", 1),
            specular_bias=np.zeros(5),
            specular_std=np.concatenate([[0.003], 0.0001 * angles]),
        )
    if landmark_type == LandmarkType.SM:
        return TypeStatistics(
            cardinality=CardinalityModel("dirac", 1),
            specular_bias=np.zeros(5),
            specular_std=np.concatenate([[0.01], 0.002 * angles]),
        )
    if landmark_type == LandmarkType.MR:
        return TypeStatistics(
            cardinality=CardinalityModel("shifted_geometric", 2, 0.55),
            specular_bias=np.array([0.07, 0.0, 0.0, 0.0, 0.0]),
            specular_std=np.concatenate([[0.1], 0.008 * angles]),
            diffuse_mean=0.435,
            diffuse_std=0.3,
        )
    return TypeStatistics(
        cardinality=CardinalityModel("shifted_geometric", 4, 0.27),
        specular_bias=np.array([0.8, 0.0, 0.0, 0.0, 0.0]),
        specular_std=np.concatenate([[0.5], 0.05 * angles]),
        diffuse_mean=0.435,
        diffuse_std=0.3,
    )


def default_statistics_table(lateral_spread: float = DEFAULT_LATERAL_SPREAD) -> Dict[LandmarkType, TypeStatistics]:
    """Statistics for every landmark type, with the simulator's lateral spread applied."""
    table = {}
    for landmark_type in LandmarkType:
        base = default_statistics(landmark_type)
        table[landmark_type] = TypeStatistics(
            cardinality=base.cardinality,
            specular_bias=base.specular_bias,
            specular_std=base.specular_std,
            diffuse_mean=base.diffuse_mean,
            diffuse_std=base.diffuse_std,
            lateral_spread=lateral_spread,
        )
    return table


class ScanConfig(BaseModel):
    """Detection and clutter settings of the scan generator and the filter's clutter model."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    detection_prob: float = Field(0.9, ge=0.0, le=1.0, alias="p_D")
    clutter_rate: float = Field(1.0, ge=0.0)
    # Clock bias of the default scenario (300 m) + [1, 250] m
    clutter_toa_min: float = 301.0
    clutter_toa_max: float = 550.0
    clutter_elevation_limit: float = Field(np.pi / 4, gt=0.0, le=np.pi / 2)
    lateral_spread: float = Field(DEFAULT_LATERAL_SPREAD, ge=0.0)

    def clutter_volume(self) -> float:
        """Volume of the clutter region in channel-parameter space."""
        toa_extent = self.clutter_toa_max - self.clutter_toa_min
        elevation_extent = 2.0 * self.clutter_elevation_limit
        return toa_extent * (2.0 * np.pi * elevation_extent) ** 2

    def in_clutter_region(self, z) -> bool:
        z = np.asarray(z, dtype=float)
        return bool(
            self.clutter_toa_min <= z[0] <= self.clutter_toa_max
            and abs(z[2]) <= self.clutter_elevation_limit
            and abs(z[4]) <= self.clutter_elevation_limit
        )


@dataclass
class Environment:
    """Known BS position and the ground-truth surfaces."""

    bs_position: np.ndarray
    surfaces: List[SurfaceSpec] = field(default_factory=list)

    def __post_init__(self):
        self.bs_position = np.asarray(self.bs_position, dtype=float).reshape(3)

    def landmarks(self) -> List[LandmarkState]:
        """Ground-truth landmarks: the BS followed by one VA per surface."""
        result = [LandmarkState(self.bs_position, LandmarkType.BS)]
        for surface in self.surfaces:
            result.append(LandmarkState(geom.reflect_bs(self.bs_position, surface), surface.surface_type))
        return result


def sample_cardinality(statistics: TypeStatistics, rng: np.random.Generator) -> int:
    """Draw the number of resolved paths of one cluster."""
    return statistics.cardinality.sample(rng)


def _in_plane_basis(normal: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    helper = np.array([0.0, 0.0, 1.0]) if abs(normal[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    first = np.cross(normal, helper)
    first /= np.linalg.norm(first)
    return first, np.cross(normal, first)


def _add_noise(z: np.ndarray, statistics: TypeStatistics, rng: np.random.Generator) -> np.ndarray:
    noisy = z + statistics.specular_bias + rng.normal(0.0, 1.0, 5) * statistics.specular_std
    for component in AZIMUTH_COMPONENTS:
        noisy[component] = wrap_angle(noisy[component])
    noisy[2] = np.clip(noisy[2], -np.pi / 2, np.pi / 2)
    noisy[4] = np.clip(noisy[4], -np.pi / 2, np.pi / 2)
    return noisy


def sample_cluster(
    landmark: LandmarkState,
    truth_state: VehicleState,
    statistics: TypeStatistics,
    bs,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Simulate the cluster of paths produced by one landmark.

    Path 0 is the specular (or LOS) path with bias and Gaussian noise. The
    remaining paths come from scatter points around the incidence point,
    spread laterally in the surface plane and displaced along the surface
    normal by N(diffuse_mean, diffuse_std^2); they carry no extra noise.

    Args:
        landmark: ground-truth landmark
        truth_state: true vehicle state
        statistics: statistics of the landmark type
        bs: BS position
        rng: random generator

    Returns:
        np.ndarray: (n, 5) cluster sorted by toa; empty on degenerate geometry
    """
    bs = np.asarray(bs, dtype=float)
    count = sample_cardinality(statistics, rng)

    try:
        if landmark.type == LandmarkType.BS:
            specular = geom.predict_channel(bs, truth_state, bs, is_los=True)
            return _add_noise(specular, statistics, rng).reshape(1, 5)

        x0 = geom.incidence_point(landmark.va_position, truth_state.position, bs)
        _, normal = geom.surface_frame(landmark.va_position, bs)
        paths = [_add_noise(geom.predict_channel(x0, truth_state, bs), statistics, rng)]

        if count > 1:
            first, second = _in_plane_basis(normal)
            lateral = rng.normal(0.0, 1.0, (count - 1, 2)) * statistics.lateral_spread
            displacement = statistics.diffuse_mean + rng.normal(0.0, 1.0, count - 1) * statistics.diffuse_std
            scatter = x0 + lateral[:, :1] * first + lateral[:, 1:] * second + displacement[:, None] * normal
            paths.extend(geom.predict_channel(scatter, truth_state, bs))
    except geom.GeometryError as e:
        logger.warning(f"Degenerate geometry for {landmark.type.value} landmark, treated as misdetection: {str(e)}")
        return as_cluster([])

    cluster = np.vstack(paths)
    return cluster[np.argsort(cluster[:, 0], kind="stable")]


def sample_clutter(config: ScanConfig, rng: np.random.Generator) -> np.ndarray:
    """One clutter vector drawn uniformly over the clutter region."""
    limit = config.clutter_elevation_limit
    return np.array([
        rng.uniform(config.clutter_toa_min, config.clutter_toa_max),
        wrap_angle(rng.uniform(-np.pi, np.pi)),
        rng.uniform(-limit, limit),
        wrap_angle(rng.uniform(-np.pi, np.pi)),
        rng.uniform(-limit, limit),
    ])


def generate_scan(
    environment: Environment,
    truth_state: VehicleState,
    config: ScanConfig,
    rng: np.random.Generator,
    statistics: Optional[Dict[LandmarkType, TypeStatistics]] = None,
) -> List[np.ndarray]:
    """
    Simulate one scan of pre-grouped clusters.

    Each landmark is detected independently with probability p_D; Poisson
    singleton clutter clusters are appended and the clusters are shuffled.

    Returns:
        List[np.ndarray]: clusters, each (n, 5)
    """
    table = statistics or default_statistics_table(config.lateral_spread)
    clusters = []

    for landmark in environment.landmarks():
        if rng.random() >= config.detection_prob:
            continue
        cluster = sample_cluster(landmark, truth_state, table[landmark.type], environment.bs_position, rng)
        if len(cluster):
            clusters.append(cluster)

    clutter_count = int(rng.poisson(config.clutter_rate))
    for _ in range(clutter_count):
        clusters.append(sample_clutter(config, rng).reshape(1, 5))

    order = rng.permutation(len(clusters))
    logger.debug(f"Generated scan with {len(clusters)} clusters ({clutter_count} clutter)")
    return [clusters[i] for i in order]


def truncate_to_specular(scan: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Keep only the minimum-toa path of every cluster."""
    return [cluster[np.argsort(cluster[:, 0], kind="stable")[:1]] for cluster in scan if len(cluster)]


# Scan dump: JSON lines, {"k": step, "clusters": [[[toa, aoa_az, aoa_el, aod_az, aod_el], ...], ...]}

def encode_scan(step: int, scan: Sequence[np.ndarray]) -> str:
    return json.dumps({"k": int(step), "clusters": [as_cluster(c).tolist() for c in scan]})


def decode_scan(line: str) -> Tuple[int, List[np.ndarray]]:
    record = json.loads(line)
    return int(record["k"]), [as_cluster(c) for c in record["clusters"]]


def dump_scans(path: Union[str, Path], scans: Sequence[Tuple[int, Sequence[np.ndarray]]]) -> None:
    """Write scans to a JSON-lines file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(encode_scan(k, scan) + "\n" for k, scan in scans), encoding="utf-8")
    logger.info(f"Dumped {len(scans)} scans to {path}")


def load_scans(path: Union[str, Path]) -> Dict[int, List[np.ndarray]]:
    """Read a JSON-lines scan dump, keyed by step."""
    scans = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            step, clusters = decode_scan(line)
            scans[step] = clusters
    logger.info(f"Loaded {len(scans)} scans from {path}")
    return scans
