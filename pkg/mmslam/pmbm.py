"""
Per-particle PMBM map density.

A Poisson part holds the undetected landmarks as a scalar mass with
measurement-driven birth; a multi-Bernoulli mixture holds the detected ones
in track-oriented form. Each track is a list of local hypotheses (Bernoulli
components) and each global hypothesis selects at most one local hypothesis
per track. Landmark densities are Gaussian mixtures over the four landmark
types, updated by sigma-point moment matching.

Maps are treated as immutable: predict/update/prune return new maps, so
resampled particles can share them.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import logsumexp

from mmslam import geom
from mmslam.assignment import MIN_LOG_WEIGHT, build_cost_matrix, murty_k_best
from mmslam.chanmodel import ScanConfig
from mmslam.likelihood import BaseLikelihoodModel, AllPathsLikelihood, clutter_log_intensity, split_cluster
from mmslam.models import (
    LANDMARK_TYPES,
    SURFACE_TYPES,
    LandmarkState,
    LandmarkType,
    VehicleState,
    as_cluster,
    channel_residual,
)
from mmslam.unscented import (
    DEFAULT_KAPPA,
    CovarianceError,
    Prediction,
    condition,
    mahalanobis_squared,
    unscented_condition,
    unscented_predict,
)


logger = logging.getLogger(__name__)

# Minimum distance (meters) between a birth candidate VA and the BS
MIN_VA_SEPARATION = 5.0

# 99.9% quantile of chi-square with 5 degrees of freedom
DEFAULT_BIRTH_GATE = 20.5


class PruningConfig(BaseModel):
    """Hypothesis management thresholds."""

    model_config = ConfigDict(extra="forbid")

    relative_threshold: float = Field(1e-4, ge=0.0, lt=1.0)
    max_hypotheses: int = Field(10, ge=1)
    existence_threshold: float = Field(1e-5, ge=0.0, lt=1.0)
    report_threshold: float = Field(0.5, gt=0.0, le=1.0)


@dataclass(frozen=True)
class MapParams:
    """
    Parameters of the map filter.

    Attributes:
        scan: detection probability and clutter model
        pruning: hypothesis management thresholds
        survival_prob: landmark survival probability p_S
        birth_weight: undetected mass added per prediction
        birth_std: standard deviation of the birth VA Gaussian (meters, per axis)
        initial_undetected_weight: undetected mass before the first scan
        gate_threshold: squared Mahalanobis gate on the specular path, None disables
        birth_gate: squared Mahalanobis gate of existing Bernoullis that suppresses a
            cluster's birth, None disables
        bs_prior_var: variance of the known-BS prior
        kappa: sigma-point spread parameter
    """

    scan: ScanConfig = field(default_factory=ScanConfig)
    pruning: PruningConfig = field(default_factory=PruningConfig)
    survival_prob: float = 0.99
    birth_weight: float = 1e-4
    birth_std: float = 5.0
    initial_undetected_weight: float = 1.0
    gate_threshold: Optional[float] = 1e4
    birth_gate: Optional[float] = DEFAULT_BIRTH_GATE
    bs_prior_var: float = 1e-6
    kappa: float = DEFAULT_KAPPA

    @property
    def detection_prob(self) -> float:
        return self.scan.detection_prob


@dataclass(frozen=True)
class LandmarkDensity:
    """Mixture over landmark types: type weights (4,), Gaussian means (4, 3) and covariances (4, 3, 3)."""

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float).reshape(len(LANDMARK_TYPES))
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", np.asarray(self.means, dtype=float).reshape(len(LANDMARK_TYPES), 3))
        object.__setattr__(self, "covs", np.asarray(self.covs, dtype=float).reshape(len(LANDMARK_TYPES), 3, 3))
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError(f"type weights must be nonnegative and sum to 1, got {weights}")

    @property
    def map_type(self) -> LandmarkType:
        return LANDMARK_TYPES[int(np.argmax(self.weights))]

    def landmark(self, landmark_type: LandmarkType) -> LandmarkState:
        return LandmarkState(self.means[landmark_type.index], landmark_type)

    @classmethod
    def known_bs(cls, bs_position, variance: float) -> "LandmarkDensity":
        weights = np.zeros(len(LANDMARK_TYPES))
        weights[LandmarkType.BS.index] = 1.0
        means = np.tile(np.asarray(bs_position, dtype=float), (len(LANDMARK_TYPES), 1))
        covs = np.tile(variance * np.eye(3), (len(LANDMARK_TYPES), 1, 1))
        return cls(weights, means, covs)


@dataclass(frozen=True)
class BernoulliComponent:
    existence: float
    density: LandmarkDensity
    id: int


@dataclass(frozen=True)
class Track:
    """Local hypotheses of one potential landmark."""

    id: int
    hypotheses: Tuple[BernoulliComponent, ...]


@dataclass(frozen=True)
class GlobalHypothesis:
    """Log-weight and the selected local hypothesis index per track (-1 when absent)."""

    log_weight: float
    selection: Tuple[int, ...]


@dataclass(frozen=True)
class PoissonIntensity:
    """Undetected landmarks: scalar mass and the prior type split used at birth."""

    undetected_weight: float
    type_weights: Tuple[float, ...] = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)


@dataclass(frozen=True)
class ParticleMap:
    tracks: Tuple[Track, ...]
    hypotheses: Tuple[GlobalHypothesis, ...]
    ppp: PoissonIntensity
    next_id: int

    @property
    def hypothesis_weights(self) -> np.ndarray:
        log_weights = np.array([h.log_weight for h in self.hypotheses])
        return np.exp(log_weights - logsumexp(log_weights))

    def best_hypothesis(self) -> GlobalHypothesis:
        return max(self.hypotheses, key=lambda h: h.log_weight)

    def bernoullis(self, hypothesis: GlobalHypothesis) -> List[BernoulliComponent]:
        return [self.tracks[j].hypotheses[a] for j, a in enumerate(hypothesis.selection) if a >= 0]


class MatchResult(NamedTuple):
    density: LandmarkDensity
    log_marginal: float
    regularized: bool


class MapUpdate(NamedTuple):
    map: ParticleMap
    log_mass: float


class EstimatedLandmark(NamedTuple):
    position: np.ndarray
    type: LandmarkType
    existence: float
    id: int


def initial_map(bs_position, params: MapParams) -> ParticleMap:
    """Map holding only the known BS (r = 1) and the initial undetected mass."""
    bs = BernoulliComponent(1.0, LandmarkDensity.known_bs(bs_position, params.bs_prior_var), 0)
    return ParticleMap(
        tracks=(Track(0, (bs,)),),
        hypotheses=(GlobalHypothesis(0.0, (0,)),),
        ppp=PoissonIntensity(params.initial_undetected_weight),
        next_id=1,
    )


def predict_map(particle_map: ParticleMap, survival_prob: float, birth_weight: float) -> ParticleMap:
    """
    Prediction of the map density.

    Undetected mass becomes p_S * mass + birth_weight; every Bernoulli's
    existence is scaled by p_S; densities and hypothesis weights are unchanged.
    """
    if not 0.0 < survival_prob <= 1.0:
        raise ValueError(f"survival probability must lie in (0, 1], got {survival_prob}")
    tracks = tuple(
        Track(track.id, tuple(replace(b, existence=survival_prob * b.existence) for b in track.hypotheses))
        for track in particle_map.tracks
    )
    ppp = replace(particle_map.ppp, undetected_weight=survival_prob * particle_map.ppp.undetected_weight + birth_weight)
    return replace(particle_map, tracks=tracks, ppp=ppp)


def _specular_function(landmark_type: LandmarkType, state: VehicleState, bs, bias: np.ndarray):
    if landmark_type == LandmarkType.BS:
        return lambda points: geom.predict_channel(points, state, bs, is_los=True) + bias
    return lambda points: geom.specular_channel(points, state, bs) + bias


def predict_specular(
    density: LandmarkDensity,
    state: VehicleState,
    bs,
    model: BaseLikelihoodModel,
    kappa: float = DEFAULT_KAPPA,
) -> Tuple[Optional[Prediction], ...]:
    """Sigma-point prediction of the specular path per type; None for zero weight or degenerate geometry."""
    predictions = []
    for landmark_type in LANDMARK_TYPES:
        k = landmark_type.index
        if density.weights[k] <= 0:
            predictions.append(None)
            continue
        statistics = model.statistics_for(landmark_type)
        fun = _specular_function(landmark_type, state, bs, statistics.specular_bias)
        try:
            predictions.append(
                unscented_predict(density.means[k], density.covs[k], fun, statistics.specular_cov, channel_residual, kappa)
            )
        except (geom.GeometryError, CovarianceError):
            predictions.append(None)
    return tuple(predictions)


def _match_type(
    landmark_type: LandmarkType,
    density: LandmarkDensity,
    prediction: Prediction,
    z0: np.ndarray,
    diffuse_points: Optional[np.ndarray],
    feasible: Optional[np.ndarray],
    bs,
    model: BaseLikelihoodModel,
    gate: Optional[float],
    kappa: float,
) -> Optional[Tuple[np.ndarray, np.ndarray, float, bool]]:
    """Posterior mean, covariance, log-likelihood (without the path count) and regularized flag of one type."""
    k = landmark_type.index
    if gate is not None and mahalanobis_squared(prediction, z0, channel_residual) > gate:
        return None

    specular = condition(density.means[k], density.covs[k], prediction, z0, channel_residual)
    mean, cov = specular.mean, specular.cov
    total = specular.log_marginal
    regularized = specular.regularized
    if diffuse_points is None or not model.uses_diffuse(landmark_type):
        return mean, cov, total, regularized

    total += model.floor * float(np.count_nonzero(~feasible))
    points = diffuse_points[feasible]
    if len(points):
        statistics = model.statistics_for(landmark_type)
        try:
            diffuse_update = unscented_condition(
                mean,
                cov,
                lambda va: geom.displacement_of_points(points, va, bs),
                np.full(len(points), statistics.diffuse_mean),
                statistics.diffuse_std ** 2 * np.eye(len(points)),
                kappa=kappa,
            )
        except geom.GeometryError:
            return None
        mean, cov = diffuse_update.mean, diffuse_update.cov
        total += diffuse_update.log_marginal
        regularized |= diffuse_update.regularized
    return mean, cov, total, regularized


def moment_match_update(
    density: LandmarkDensity,
    cluster,
    state: VehicleState,
    bs,
    model: Optional[BaseLikelihoodModel] = None,
    predictions: Optional[Sequence[Optional[Prediction]]] = None,
    gate: Optional[float] = None,
    kappa: float = DEFAULT_KAPPA,
) -> MatchResult:
    """
    Gaussian approximation of likelihood x density for one cluster.

    Per type: condition the type Gaussian on the specular path through the
    sigma-point transform, then on the surface displacements of the diffuse
    paths (each a scalar measurement N(d; diffuse_mean, diffuse_std^2)), and
    reweight the type by its marginal likelihood times the path-count pmf.

    Args:
        density: prior landmark density
        cluster: (n, 5) channel parameters
        state: vehicle state
        bs: BS position
        model: likelihood model, all-paths with default statistics if omitted
        predictions: cached predict_specular output for this density and state
        gate: squared Mahalanobis gate on the specular path, None disables
        kappa: sigma-point spread parameter

    Returns:
        MatchResult: posterior density, log of the integral of likelihood x density
            (without p_D), and whether any covariance was regularized
    """
    model = model or AllPathsLikelihood()
    z = as_cluster(cluster)
    z0, diffuse = split_cluster(z)
    if predictions is None:
        predictions = predict_specular(density, state, bs, model, kappa)

    means = density.means.copy()
    covs = density.covs.copy()
    log_rho = np.full(len(LANDMARK_TYPES), -np.inf)
    regularized = False
    diffuse_points, feasible = None, None

    for landmark_type in LANDMARK_TYPES:
        k = landmark_type.index
        prediction = predictions[k]
        if prediction is None:
            continue
        log_card = model.cardinality_log_pmf(len(z), landmark_type)
        if not np.isfinite(log_card):
            continue
        if model.uses_diffuse(landmark_type) and len(diffuse) and diffuse_points is None:
            diffuse_points, feasible = geom.backproject_cluster(diffuse, state, bs)
        try:
            matched = _match_type(
                landmark_type, density, prediction, z0, diffuse_points, feasible, bs, model, gate, kappa
            )
        except CovarianceError as e:
            logger.debug(f"Dropping {landmark_type.value} component: {str(e)}")
            continue
        if matched is None:
            continue
        mean, cov, log_likelihood, type_regularized = matched
        means[k], covs[k], log_rho[k] = mean, cov, log_card + log_likelihood
        regularized |= type_regularized

    with np.errstate(divide="ignore"):
        log_joint = np.log(density.weights) + log_rho
    log_marginal = float(logsumexp(log_joint))
    if not np.isfinite(log_marginal):
        return MatchResult(density, -np.inf, regularized)

    weights = np.exp(log_joint - log_marginal)
    weights /= weights.sum()
    return MatchResult(LandmarkDensity(weights, means, covs), log_marginal, regularized)


class Birth(NamedTuple):
    density: LandmarkDensity
    log_mass: float


def birth_density(cluster, state: VehicleState, bs, model: BaseLikelihoodModel, ppp: PoissonIntensity, birth_std: float) -> Optional[Birth]:
    """
    Measurement-driven birth density for a cluster.

    For each surface type the bias-corrected specular path is back-projected
    to an incidence point; the VA candidate lies beyond it along the arrival
    ray at the BS-to-incidence distance. Candidates within MIN_VA_SEPARATION
    of the BS (a LOS path back-projects onto the BS) are infeasible.

    Returns:
        Birth: normalized density over the types with a feasible candidate and
            the log of their total prior type weight; None when no type is feasible
    """
    z0, _ = split_cluster(cluster)
    bs = np.asarray(bs, dtype=float)
    weights = np.zeros(len(LANDMARK_TYPES))
    means = np.zeros((len(LANDMARK_TYPES), 3))

    for landmark_type, type_weight in zip(SURFACE_TYPES, ppp.type_weights):
        try:
            x0 = geom.backproject(z0 - model.statistics_for(landmark_type).specular_bias, state, bs)
        except geom.GeometryError:
            continue
        ray = x0 - state.position
        ray /= np.linalg.norm(ray)
        va = x0 + np.linalg.norm(x0 - bs) * ray
        if np.linalg.norm(va - bs) < MIN_VA_SEPARATION:
            continue
        means[landmark_type.index] = va
        weights[landmark_type.index] = type_weight

    total = weights.sum()
    if total <= 0:
        return None
    feasible = np.flatnonzero(weights > 0)
    means[weights == 0] = means[feasible[0]]
    covs = np.tile(birth_std ** 2 * np.eye(3), (len(LANDMARK_TYPES), 1, 1))
    return Birth(LandmarkDensity(weights / total, means, covs), float(np.log(total)))


def _log(value: float) -> float:
    return float(np.log(value)) if value > 0 else -np.inf


def _inside_track_gate(cluster, tracks: Sequence[Track], specular_predictions, threshold: float) -> bool:
    """Whether the specular path of a cluster lies inside the gate of an existing Bernoulli."""
    z0, _ = split_cluster(cluster)
    for j, track in enumerate(tracks):
        for a, bernoulli in enumerate(track.hypotheses):
            if bernoulli.existence <= 0:
                continue
            for prediction in specular_predictions(j, a):
                if prediction is None:
                    continue
                try:
                    if mahalanobis_squared(prediction, z0, channel_residual) <= threshold:
                        return True
                except CovarianceError:
                    continue
    return False


def update_map(
    particle_map: ParticleMap,
    scan: Sequence[np.ndarray],
    state: VehicleState,
    bs,
    model: BaseLikelihoodModel,
    params: MapParams,
) -> MapUpdate:
    """
    Update of the predicted map with one scan.

    Undetected mass is scaled by (1 - p_D); every cluster spawns a new track
    (landmark detected for the first time, or clutter), with no birth for a
    cluster whose specular path falls inside the birth gate of an existing
    Bernoulli; every existing local
    hypothesis gets a misdetection child and one detection child per cluster.
    Global hypotheses are generated per predecessor with Murty's algorithm,
    k = ceil(H_max * predecessor weight).

    Args:
        particle_map: predicted map
        scan: clusters of the current step
        state: vehicle state of the particle
        bs: BS position
        model: likelihood model
        params: map filter parameters

    Returns:
        MapUpdate: updated map with normalized hypothesis weights, and the log of the
            total unnormalized hypothesis mass used for the particle weight
    """
    p_d = params.detection_prob
    clusters = [as_cluster(c) for c in scan if len(c)]
    m = len(clusters)
    tracks = particle_map.tracks
    u = particle_map.ppp.undetected_weight

    predictions: Dict[Tuple[int, int], Tuple[Optional[Prediction], ...]] = {}

    def specular_predictions(j: int, a: int) -> Tuple[Optional[Prediction], ...]:
        if (j, a) not in predictions:
            predictions[(j, a)] = predict_specular(tracks[j].hypotheses[a].density, state, bs, model, params.kappa)
        return predictions[(j, a)]

    explained = [
        params.birth_gate is not None and _inside_track_gate(cluster, tracks, specular_predictions, params.birth_gate)
        for cluster in clusters
    ]

    # Case b: first detection or clutter
    new_log_weights = np.empty(m)
    new_tracks = []
    for i, cluster in enumerate(clusters):
        log_clutter = clutter_log_intensity(cluster, params.scan)
        log_rho_u = -np.inf
        density = None
        birth = None if explained[i] else birth_density(cluster, state, bs, model, particle_map.ppp, params.birth_std)
        if birth is not None:
            density = birth.density
            if u > 0 and p_d > 0:
                match = moment_match_update(birth.density, cluster, state, bs, model, kappa=params.kappa)
                if np.isfinite(match.log_marginal):
                    density = match.density
                    log_rho_u = np.log(p_d) + np.log(u) + birth.log_mass + match.log_marginal

        log_l_u = float(np.logaddexp(log_clutter, log_rho_u))
        new_log_weights[i] = max(log_l_u, MIN_LOG_WEIGHT)
        track_id = particle_map.next_id + i
        if density is None:
            new_tracks.append(Track(track_id, ()))
        else:
            existence = float(np.exp(log_rho_u - log_l_u)) if np.isfinite(log_rho_u) else 0.0
            new_tracks.append(Track(track_id, (BernoulliComponent(existence, density, track_id),)))

    detections: Dict[Tuple[int, int, int], MatchResult] = {}

    def detection(j: int, a: int, i: int) -> MatchResult:
        key = (j, a, i)
        if key not in detections:
            detections[key] = moment_match_update(
                tracks[j].hypotheses[a].density,
                clusters[i],
                state,
                bs,
                model,
                specular_predictions(j, a),
                params.gate_threshold,
                params.kappa,
            )
        return detections[key]

    local_lists: List[List[BernoulliComponent]] = [[] for _ in tracks]
    local_index: List[Dict[Tuple[int, int], int]] = [{} for _ in tracks]

    def child(j: int, a: int, i: int) -> int:
        """Index of the child local hypothesis (i = -1 for misdetection), created on first use."""
        if (a, i) not in local_index[j]:
            parent = tracks[j].hypotheses[a]
            if i < 0:
                denominator = 1.0 - parent.existence * p_d
                existence = parent.existence * (1.0 - p_d) / denominator if denominator > 0 else 0.0
                component = replace(parent, existence=existence)
            else:
                component = BernoulliComponent(1.0, detection(j, a, i).density, parent.id)
            local_index[j][(a, i)] = len(local_lists[j])
            local_lists[j].append(component)
        return local_index[j][(a, i)]

    # Cases c and d per predecessor global hypothesis
    hypotheses = []
    max_hypotheses = params.pruning.max_hypotheses
    predecessor_weights = particle_map.hypothesis_weights
    for predecessor, weight in zip(particle_map.hypotheses, predecessor_weights):
        present = [j for j, a in enumerate(predecessor.selection) if a >= 0]
        detection_log = np.full((m, len(present)), -np.inf)
        misdetection_log = np.empty(len(present))

        for column, j in enumerate(present):
            existence = tracks[j].hypotheses[predecessor.selection[j]].existence
            misdetection_log[column] = _log(1.0 - existence * p_d)
            if existence > 0 and p_d > 0:
                for i in range(m):
                    match = detection(j, predecessor.selection[j], i)
                    detection_log[i, column] = np.log(existence) + np.log(p_d) + match.log_marginal

        cost, constant = build_cost_matrix(detection_log, misdetection_log, new_log_weights)
        k = max(1, math.ceil(max_hypotheses * weight))
        for solution in murty_k_best(cost, k):
            selection = [-1] * (len(tracks) + m)
            for j in present:
                selection[j] = child(j, predecessor.selection[j], -1)
            for i, column in enumerate(solution.columns):
                if column < len(present):
                    j = present[column]
                    selection[j] = child(j, predecessor.selection[j], i)
                elif new_tracks[i].hypotheses:
                    selection[len(tracks) + i] = 0
            hypotheses.append(GlobalHypothesis(predecessor.log_weight + constant - solution.cost, tuple(selection)))

    log_weights = np.array([h.log_weight for h in hypotheses])
    log_mass = float(logsumexp(log_weights))
    hypotheses = [replace(h, log_weight=h.log_weight - log_mass) for h in hypotheses]

    updated_tracks = tuple(Track(track.id, tuple(local_lists[j])) for j, track in enumerate(tracks)) + tuple(new_tracks)
    ppp = replace(particle_map.ppp, undetected_weight=(1.0 - p_d) * u)
    logger.debug(
        f"Map update: {m} clusters, {sum(explained)} births gated, "
        f"{len(particle_map.hypotheses)} -> {len(hypotheses)} hypotheses, {len(detections)} detection evaluations"
    )
    updated = ParticleMap(updated_tracks, tuple(hypotheses), ppp, particle_map.next_id + m)
    return MapUpdate(updated, log_mass)


def _merge(hypotheses: Sequence[GlobalHypothesis]) -> List[GlobalHypothesis]:
    """Combine hypotheses with identical selections by adding their weights."""
    merged: Dict[Tuple[int, ...], float] = {}
    for hypothesis in hypotheses:
        if hypothesis.selection in merged:
            merged[hypothesis.selection] = float(np.logaddexp(merged[hypothesis.selection], hypothesis.log_weight))
        else:
            merged[hypothesis.selection] = hypothesis.log_weight
    return [GlobalHypothesis(w, s) for s, w in merged.items()]


def _normalize(hypotheses: Sequence[GlobalHypothesis]) -> List[GlobalHypothesis]:
    total = logsumexp([h.log_weight for h in hypotheses])
    return [replace(h, log_weight=float(h.log_weight - total)) for h in hypotheses]


def _compact(tracks: Sequence[Track], hypotheses: Sequence[GlobalHypothesis]) -> Tuple[Tuple[Track, ...], List[GlobalHypothesis]]:
    """Drop local hypotheses no global hypothesis references and tracks left empty."""
    kept_tracks = []
    remap = []
    for j, track in enumerate(tracks):
        used = sorted({h.selection[j] for h in hypotheses if h.selection[j] >= 0})
        if used:
            remap.append({a: b for b, a in enumerate(used)})
            kept_tracks.append((j, Track(track.id, tuple(track.hypotheses[a] for a in used))))
        else:
            remap.append(None)

    compacted = []
    for hypothesis in hypotheses:
        selection = tuple(
            remap[j][hypothesis.selection[j]] if hypothesis.selection[j] >= 0 else -1 for j, _ in kept_tracks
        )
        compacted.append(GlobalHypothesis(hypothesis.log_weight, selection))
    return tuple(track for _, track in kept_tracks), compacted


def prune(particle_map: ParticleMap, thresholds: PruningConfig) -> ParticleMap:
    """
    Hypothesis reduction.

    Drops global hypotheses below relative_threshold x the best weight, keeps
    at most max_hypotheses by weight, removes Bernoullis with existence below
    existence_threshold from every hypothesis, merges duplicates and
    renormalizes.
    """
    hypotheses = _normalize(_merge(particle_map.hypotheses))
    best = max(h.log_weight for h in hypotheses)
    floor = best + np.log(thresholds.relative_threshold) if thresholds.relative_threshold > 0 else -np.inf
    hypotheses = [h for h in hypotheses if h.log_weight >= floor]
    hypotheses.sort(key=lambda h: (-h.log_weight, h.selection))
    hypotheses = hypotheses[: thresholds.max_hypotheses]

    tracks = particle_map.tracks
    trimmed = []
    for hypothesis in hypotheses:
        selection = tuple(
            a if a >= 0 and tracks[j].hypotheses[a].existence >= thresholds.existence_threshold else -1
            for j, a in enumerate(hypothesis.selection)
        )
        trimmed.append(GlobalHypothesis(hypothesis.log_weight, selection))

    hypotheses = _normalize(_merge(trimmed))
    hypotheses.sort(key=lambda h: (-h.log_weight, h.selection))
    tracks, hypotheses = _compact(tracks, hypotheses)
    logger.debug(f"Pruned map to {len(hypotheses)} hypotheses over {len(tracks)} tracks")
    return replace(particle_map, tracks=tracks, hypotheses=tuple(hypotheses))


def estimate_map(particle_map: ParticleMap, report_threshold: float = 0.5) -> List[EstimatedLandmark]:
    """
    Landmarks of the highest-weight global hypothesis with existence above the threshold.

    Each is reported with its MAP type and that type's Gaussian mean.
    """
    if not particle_map.hypotheses:
        return []
    estimates = []
    for bernoulli in particle_map.bernoullis(particle_map.best_hypothesis()):
        if bernoulli.existence > report_threshold:
            landmark_type = bernoulli.density.map_type
            estimates.append(
                EstimatedLandmark(
                    bernoulli.density.means[landmark_type.index].copy(), landmark_type, bernoulli.existence, bernoulli.id
                )
            )
    return estimates


def snapshot_map(particle_map: ParticleMap) -> Dict[str, Any]:
    """JSON-ready snapshot: Bernoullis of the best hypothesis and all hypothesis weights."""
    bernoullis = []
    if particle_map.hypotheses:
        for bernoulli in particle_map.bernoullis(particle_map.best_hypothesis()):
            density = bernoulli.density
            bernoullis.append({
                "id": int(bernoulli.id),
                "r": float(bernoulli.existence),
                "types": {
                    t.value: {
                        "w": float(density.weights[t.index]),
                        "mean": density.means[t.index].tolist(),
                        "cov": density.covs[t.index].tolist(),
                    }
                    for t in LANDMARK_TYPES
                },
            })
    return {
        "bernoullis": bernoullis,
        "hypothesis_weights": [float(w) for w in particle_map.hypothesis_weights] if particle_map.hypotheses else [],
        "undetected_weight": float(particle_map.ppp.undetected_weight),
    }
