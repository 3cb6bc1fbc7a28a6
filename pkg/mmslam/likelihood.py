"""
Cluster likelihood for the four landmark types and the clutter density.

The likelihood of a cluster factorizes into the path-count pmf, a Gaussian
density of the specular (minimum-toa) path and one scalar Gaussian per
diffuse path evaluated on its surface displacement. Everything is evaluated
in the log domain.
"""

import logging
from abc import ABC, abstractmethod
from typing import Dict, Optional, Protocol

import numpy as np
from scipy import stats

from mmslam import geom
from mmslam.chanmodel import ScanConfig, TypeStatistics, default_statistics, default_statistics_table
from mmslam.models import LandmarkState, LandmarkType, VehicleState, as_cluster, channel_residual


logger = logging.getLogger(__name__)

# Log-density charged to a diffuse path whose back-projection fails
DEFAULT_BACKPROJECTION_FLOOR = -40.0

LIKELIHOOD_MODES = ("all_paths", "specular_only")


class LikelihoodError(ValueError):
    """Raised when a density is requested for a type that does not define it."""


def cardinality_pmf(n: int, landmark_type: LandmarkType) -> float:
    """
    Probability of observing n paths from a landmark of the given type.

    Args:
        n: number of paths (>= 0)
        landmark_type: BS, SM, MR or VR

    Returns:
        float: p(|Z| = n | type)
    """
    return default_statistics(landmark_type).cardinality.pmf(n)


def specular_mean(landmark: LandmarkState, state: VehicleState, bs, statistics: TypeStatistics) -> np.ndarray:
    """Expected specular (or LOS) channel parameters including the type bias."""
    if landmark.type == LandmarkType.BS:
        geometric = geom.predict_channel(bs, state, bs, is_los=True)
    else:
        geometric = geom.specular_channel(landmark.va_position, state, bs)
    return geometric + statistics.specular_bias


def specular_log_density(
    z0,
    landmark: LandmarkState,
    state: VehicleState,
    bs,
    statistics: Optional[TypeStatistics] = None,
) -> float:
    """Log of specular_density; -inf on degenerate geometry."""
    statistics = statistics or default_statistics(landmark.type)
    try:
        mean = specular_mean(landmark, state, bs, statistics)
    except geom.GeometryError:
        return -np.inf
    residual = channel_residual(z0, mean)
    return float(np.sum(stats.norm.logpdf(residual, loc=0.0, scale=statistics.specular_std)))


def specular_density(z0, landmark: LandmarkState, state: VehicleState, bs) -> float:
    """
    Gaussian density of the specular path given the landmark and vehicle state.

    Args:
        z0: channel parameters of the minimum-toa path
        landmark: landmark hypothesis (VA position and type)
        state: vehicle state
        bs: BS position

    Returns:
        float: density value, 0 for degenerate geometry
    """
    return float(np.exp(specular_log_density(z0, landmark, state, bs)))


def diffuse_log_density(d_hat, landmark_type: LandmarkType, statistics: Optional[TypeStatistics] = None):
    """Log of diffuse_density; accepts scalars or arrays of displacements."""
    statistics = statistics or default_statistics(landmark_type)
    if not statistics.has_diffuse:
        raise LikelihoodError("no diffuse component")
    return stats.norm.logpdf(d_hat, loc=statistics.diffuse_mean, scale=statistics.diffuse_std)


def diffuse_density(d_hat: float, landmark_type: LandmarkType) -> float:
    """
    Density of a diffuse path's surface displacement.

    Raises:
        LikelihoodError: "no diffuse component" for BS and SM
    """
    return float(np.exp(diffuse_log_density(d_hat, landmark_type)))


def split_cluster(cluster) -> tuple:
    """Split a cluster into its minimum-toa path and the remaining paths."""
    z = as_cluster(cluster)
    order = np.argsort(z[:, 0], kind="stable")
    return z[order[0]], z[order[1:]]


def clutter_density(z, config: ScanConfig) -> float:
    """
    Uniform clutter density over the clutter region.

    Returns:
        float: 1 / volume inside the region, 0 outside
    """
    if not config.in_clutter_region(z):
        return 0.0
    return 1.0 / config.clutter_volume()


def clutter_log_intensity(cluster, config: ScanConfig) -> float:
    """Log clutter weight of a cluster: clutter_rate x density for singletons, -inf otherwise."""
    z = as_cluster(cluster)
    if len(z) != 1 or config.clutter_rate <= 0:
        return -np.inf
    density = clutter_density(z[0], config)
    if density <= 0:
        return -np.inf
    return float(np.log(config.clutter_rate * density))


class LikelihoodModel(Protocol):
    """Interface the map filter uses to score clusters."""

    name: str
    floor: float

    def statistics_for(self, landmark_type: LandmarkType) -> TypeStatistics:
        ...

    def cardinality_log_pmf(self, n: int, landmark_type: LandmarkType) -> float:
        ...

    def uses_diffuse(self, landmark_type: LandmarkType) -> bool:
        ...

    def cluster_log_likelihood(self, cluster, landmark: LandmarkState, state: VehicleState, bs) -> float:
        ...


class BaseLikelihoodModel(ABC):
    """
    Common cluster scoring.

    Subclasses decide the path-count model and whether diffuse paths
    contribute.
    """

    name = "base"

    def __init__(
        self,
        statistics: Optional[Dict[LandmarkType, TypeStatistics]] = None,
        floor: float = DEFAULT_BACKPROJECTION_FLOOR,
    ):
        self.statistics = statistics or default_statistics_table()
        self.floor = floor

    def statistics_for(self, landmark_type: LandmarkType) -> TypeStatistics:
        return self.statistics[LandmarkType(landmark_type)]

    @abstractmethod
    def cardinality_log_pmf(self, n: int, landmark_type: LandmarkType) -> float:
        pass

    @abstractmethod
    def uses_diffuse(self, landmark_type: LandmarkType) -> bool:
        pass

    def diffuse_log_likelihood(self, diffuse, landmark: LandmarkState, state: VehicleState, bs) -> float:
        """Sum of diffuse log-densities, with the floor for paths that fail back-projection."""
        if len(diffuse) == 0:
            return 0.0
        statistics = self.statistics_for(landmark.type)
        points, feasible = geom.backproject_cluster(diffuse, state, bs)
        total = self.floor * float(np.count_nonzero(~feasible))
        if np.any(feasible):
            d_hat = geom.displacement_of_points(points[feasible], landmark.va_position, bs)
            total += float(np.sum(diffuse_log_density(d_hat, landmark.type, statistics)))
        return total

    def cluster_log_likelihood(self, cluster, landmark: LandmarkState, state: VehicleState, bs) -> float:
        """
        Log-likelihood of a cluster for one landmark hypothesis.

        Args:
            cluster: (n, 5) channel parameters, n >= 1
            landmark: VA position and type
            state: vehicle state
            bs: BS position

        Returns:
            float: log-density, -inf when the path count is impossible for the type
        """
        z = as_cluster(cluster)
        if len(z) == 0:
            raise ValueError("cluster must contain at least one path")

        log_likelihood = self.cardinality_log_pmf(len(z), landmark.type)
        if not np.isfinite(log_likelihood):
            return -np.inf

        z0, diffuse = split_cluster(z)
        log_likelihood += specular_log_density(z0, landmark, state, bs, self.statistics_for(landmark.type))
        if not np.isfinite(log_likelihood):
            return -np.inf

        if self.uses_diffuse(landmark.type):
            try:
                log_likelihood += self.diffuse_log_likelihood(diffuse, landmark, state, bs)
            except geom.GeometryError:
                return -np.inf
        return float(log_likelihood)


class AllPathsLikelihood(BaseLikelihoodModel):
    """Full cluster likelihood using the specular path and every diffuse path."""

    name = "all_paths"

    def cardinality_log_pmf(self, n: int, landmark_type: LandmarkType) -> float:
        return self.statistics_for(landmark_type).cardinality.log_pmf(n)

    def uses_diffuse(self, landmark_type: LandmarkType) -> bool:
        return self.statistics_for(landmark_type).has_diffuse


class SpecularOnlyLikelihood(BaseLikelihoodModel):
    """Baseline that treats every source as a single specular path."""

    name = "specular_only"

    def cardinality_log_pmf(self, n: int, landmark_type: LandmarkType) -> float:
        return 0.0 if n == 1 else -np.inf

    def uses_diffuse(self, landmark_type: LandmarkType) -> bool:
        return False


def get_likelihood_model(
    mode: str = "all_paths",
    statistics: Optional[Dict[LandmarkType, TypeStatistics]] = None,
    floor: float = DEFAULT_BACKPROJECTION_FLOOR,
) -> BaseLikelihoodModel:
    """
    Factory function to create the likelihood model for a mode.

    Args:
        mode: "all_paths" or "specular_only"
        statistics: per-type statistics, defaults to the fitted table
        floor: back-projection failure log-density

    Returns:
        BaseLikelihoodModel: configured model
    """
    if mode == "all_paths":
        return AllPathsLikelihood(statistics, floor)
    if mode == "specular_only":
        return SpecularOnlyLikelihood(statistics, floor)
    raise ValueError(f"Unknown likelihood mode: {mode}. Use one of {LIKELIHOOD_MODES}")


def cluster_log_likelihood(cluster, landmark: LandmarkState, state: VehicleState, bs) -> float:
    """Cluster log-likelihood under the full all-paths model with default statistics."""
    return AllPathsLikelihood().cluster_log_likelihood(cluster, landmark, state, bs)
