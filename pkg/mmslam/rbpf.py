"""
Rao-Blackwellized particle filter over the vehicle state.

Each particle carries a vehicle state sample, a log-weight and its own PMBM
map. Particles are propagated with the constant-turn-rate model, weighted by
the total hypothesis mass of their map update and resampled systematically
when the effective sample size drops.
"""

import logging
from dataclasses import dataclass, replace
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from mmslam import pmbm
from mmslam.likelihood import BaseLikelihoodModel
from mmslam.models import VehicleState, wrap_angle


logger = logging.getLogger(__name__)

# Process noise acts on (x, y, heading, speed, turn_rate, clock_bias); z is noiseless
NOISE_COMPONENTS = (0, 1, 3, 4, 5, 6)
DEFAULT_PROCESS_NOISE_STD = (0.2, 0.2, 0.01, 0.2, 0.01, 0.2)
STRAIGHT_LINE_TURN_RATE = 1e-6


class FilterDivergenceError(RuntimeError):
    """Raised when every particle has zero weight."""


@dataclass(frozen=True)
class Particle:
    state: VehicleState
    log_weight: float
    map: pmbm.ParticleMap


def default_process_noise() -> np.ndarray:
    return np.diag(np.square(DEFAULT_PROCESS_NOISE_STD))


def constant_turn(state: VehicleState, dt: float) -> np.ndarray:
    """Noise-free constant-turn-rate transition; returns the 7-vector."""
    x, y, z, heading, speed, turn_rate, bias = state.to_vector()
    if abs(turn_rate) > STRAIGHT_LINE_TURN_RATE:
        radius = speed / turn_rate
        x += radius * (np.sin(heading + turn_rate * dt) - np.sin(heading))
        y += radius * (-np.cos(heading + turn_rate * dt) + np.cos(heading))
    else:
        x += speed * dt * np.cos(heading)
        y += speed * dt * np.sin(heading)
    return np.array([x, y, z, wrap_angle(heading + turn_rate * dt), speed, turn_rate, bias])


def predict_particle(state: VehicleState, dt: float, noise_cov, rng: np.random.Generator) -> VehicleState:
    """
    Constant-turn-rate prediction with additive Gaussian noise.

    Args:
        state: current vehicle state
        dt: time step in seconds (> 0)
        noise_cov: 6 x 6 covariance on (x, y, heading, speed, turn_rate, clock_bias)
        rng: random generator

    Returns:
        VehicleState: predicted state, speed clipped at zero
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    vector = constant_turn(state, dt)
    noise_cov = np.asarray(noise_cov, dtype=float)
    if np.any(noise_cov):
        vector[list(NOISE_COMPONENTS)] += rng.multivariate_normal(np.zeros(len(NOISE_COMPONENTS)), noise_cov)
    vector[4] = max(vector[4], 0.0)
    return VehicleState.from_vector(vector)


def normalized_weights(particles: Sequence[Particle]) -> np.ndarray:
    log_weights = np.array([p.log_weight for p in particles])
    return np.exp(log_weights - logsumexp(log_weights))


def effective_sample_size(particles: Sequence[Particle]) -> float:
    weights = normalized_weights(particles)
    return float(1.0 / np.sum(weights ** 2))


def _dump_particles(particles: Sequence[Particle], log_masses: Sequence[float]) -> None:
    for i, (particle, log_mass) in enumerate(zip(particles, log_masses)):
        logger.error(
            f"particle {i}: state={np.round(particle.state.to_vector(), 4).tolist()} "
            f"log_weight={particle.log_weight:.4f} log_mass={log_mass} "
            f"hypotheses={len(particle.map.hypotheses)}"
        )


def update_weights(particles: Sequence[Particle], log_masses: Sequence[float]) -> List[Particle]:
    """
    Multiply particle weights by their map hypothesis mass and normalize.

    Args:
        particles: particles with normalized log-weights
        log_masses: log of the summed unnormalized hypothesis weights per particle

    Returns:
        List[Particle]: particles with normalized log-weights

    Raises:
        FilterDivergenceError: when every particle ends at -inf
    """
    log_weights = np.array([p.log_weight for p in particles]) + np.asarray(log_masses, dtype=float)
    total = logsumexp(log_weights)
    if not np.isfinite(total):
        logger.error("Filter divergence: every particle has zero weight")
        _dump_particles(particles, log_masses)
        raise FilterDivergenceError("filter divergence")
    return [replace(p, log_weight=float(w - total)) for p, w in zip(particles, log_weights)]


def systematic_indices(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Ancestor indices from systematic resampling with a single uniform offset."""
    n = len(weights)
    positions = (rng.random() + np.arange(n)) / n
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0
    return np.searchsorted(cumulative, positions, side="right")


def resample(particles: Sequence[Particle], ess_threshold_fraction: float, rng: np.random.Generator) -> List[Particle]:
    """
    Systematic resampling when ESS < threshold x N.

    Returns:
        List[Particle]: resampled particles with equal weights, or the input unchanged
    """
    n = len(particles)
    if effective_sample_size(particles) >= ess_threshold_fraction * n:
        return list(particles)
    indices = systematic_indices(normalized_weights(particles), rng)
    log_weight = -float(np.log(n))
    logger.debug(f"Resampled {n} particles, {len(set(indices.tolist()))} distinct ancestors")
    return [replace(particles[i], log_weight=log_weight) for i in indices]


def estimate_state(particles: Sequence[Particle]) -> VehicleState:
    """
    Weighted mean state; the heading uses the circular mean.
    """
    weights = normalized_weights(particles)
    vectors = np.array([p.state.to_vector() for p in particles])
    mean = weights @ vectors
    mean[3] = np.arctan2(weights @ np.sin(vectors[:, 3]), weights @ np.cos(vectors[:, 3]))
    mean[4] = max(mean[4], 0.0)
    return VehicleState.from_vector(mean)


def sample_prior(mean: VehicleState, std, count: int, rng: np.random.Generator) -> List[VehicleState]:
    """Initial particle states: mean + independent Gaussian perturbations, speed folded to nonnegative."""
    vectors = mean.to_vector() + rng.normal(0.0, 1.0, (count, 7)) * np.asarray(std, dtype=float)
    vectors[:, 4] = np.abs(vectors[:, 4])
    return [VehicleState.from_vector(v) for v in vectors]


class StepResult(NamedTuple):
    estimate: VehicleState
    landmarks: List[pmbm.EstimatedLandmark]
    ess: float
    best_map: pmbm.ParticleMap


class SlamFilter:
    """
    Coordinator of the particle set.

    Per step: propagate particles (or pin them to a known state), predict
    and update every particle map, reweight, prune, estimate and resample.
    """

    def __init__(
        self,
        states: Sequence[VehicleState],
        bs_position,
        model: BaseLikelihoodModel,
        params: pmbm.MapParams,
        dt: float,
        process_noise,
        rng: np.random.Generator,
        ess_threshold: float = 0.5,
    ):
        self.bs_position = np.asarray(bs_position, dtype=float)
        self.model = model
        self.params = params
        self.dt = dt
        self.process_noise = np.asarray(process_noise, dtype=float)
        self.rng = rng
        self.ess_threshold = ess_threshold

        empty_map = pmbm.initial_map(self.bs_position, params)
        log_weight = -float(np.log(len(states)))
        self.particles = [Particle(state, log_weight, empty_map) for state in states]
        logger.info(f"Initialized filter with {len(self.particles)} particles ({model.name} likelihood)")

    def step(self, scan: Sequence[np.ndarray], known_state: Optional[VehicleState] = None) -> StepResult:
        """
        Process one scan.

        Args:
            scan: clusters of the step
            known_state: when given, every particle uses this state instead of a prediction

        Returns:
            StepResult: state estimate, landmark estimates of the best particle, ESS before
                resampling, and the best particle's map
        """
        params = self.params
        updated = []
        log_masses = []
        for particle in self.particles:
            if known_state is not None:
                state = known_state
            else:
                state = predict_particle(particle.state, self.dt, self.process_noise, self.rng)
            predicted_map = pmbm.predict_map(particle.map, params.survival_prob, params.birth_weight)
            result = pmbm.update_map(predicted_map, scan, state, self.bs_position, self.model, params)
            updated.append(Particle(state, particle.log_weight, result.map))
            log_masses.append(result.log_mass)

        particles = update_weights(updated, log_masses)
        particles = [replace(p, map=pmbm.prune(p.map, params.pruning)) for p in particles]

        estimate = estimate_state(particles)
        ess = effective_sample_size(particles)
        best = max(particles, key=lambda p: p.log_weight)
        landmarks = pmbm.estimate_map(best.map, params.pruning.report_threshold)

        self.particles = resample(particles, self.ess_threshold, self.rng)
        return StepResult(estimate, landmarks, ess, best.map)
