import numpy as np
import pytest

from mmslam import chanmodel, pmbm, rbpf
from mmslam.likelihood import AllPathsLikelihood
from mmslam.pmbm import MapParams
from mmslam.rbpf import FilterDivergenceError, Particle, SlamFilter

from conftest import make_state


def _particles(log_weights, bs=np.array([0.0, 0.0, 10.0]), states=None):
    empty = pmbm.initial_map(bs, MapParams())
    states = states or [make_state([float(i), 0.0, 0.0]) for i in range(len(log_weights))]
    return [Particle(state, float(w), empty) for state, w in zip(states, log_weights)]


def test_constant_turn_stays_on_circle(truth_state):
    state = truth_state
    radius = truth_state.speed / truth_state.turn_rate
    assert radius == pytest.approx(70.73, abs=1e-2)
    for _ in range(40):
        state = rbpf.predict_particle(state, 0.5, np.zeros((6, 6)), None)
        assert np.linalg.norm(state.position[:2]) == pytest.approx(radius, abs=1e-3)
    # one full revolution after 20 s
    np.testing.assert_allclose(state.position, truth_state.position, atol=1e-6)
    assert state.heading == pytest.approx(truth_state.heading, abs=1e-9)


def test_constant_turn_straight_line():
    state = make_state([0.0, 0.0, 0.0], heading=0.0, speed=10.0, turn_rate=0.0, clock_bias=300.0)
    moved = rbpf.constant_turn(state, 1.0)
    np.testing.assert_allclose(moved, [10.0, 0.0, 0.0, 0.0, 10.0, 0.0, 300.0], atol=1e-12)


def test_predict_rejects_non_positive_dt(truth_state):
    with pytest.raises(ValueError):
        rbpf.predict_particle(truth_state, 0.0, np.zeros((6, 6)), None)


def test_predict_noise_leaves_height(truth_state, rng):
    predicted = [rbpf.predict_particle(truth_state, 0.5, rbpf.default_process_noise(), rng) for _ in range(200)]
    assert all(s.position[2] == truth_state.position[2] for s in predicted)
    assert all(s.speed >= 0 for s in predicted)
    assert np.std([s.clock_bias for s in predicted]) == pytest.approx(0.2, rel=0.25)


def test_update_weights_example():
    particles = _particles(np.log([0.5, 0.5]))
    updated = rbpf.update_weights(particles, [0.0, -2.0])
    np.testing.assert_allclose(rbpf.normalized_weights(updated), [0.8808, 0.1192], atol=1e-4)
    assert sum(np.exp(p.log_weight) for p in updated) == pytest.approx(1.0)


def test_update_weights_divergence(caplog):
    particles = _particles(np.log([0.5, 0.5]))
    with pytest.raises(FilterDivergenceError, match="filter divergence"):
        rbpf.update_weights(particles, [-np.inf, -np.inf])
    assert "particle 1" in caplog.text


def test_effective_sample_size_bounds():
    assert rbpf.effective_sample_size(_particles(np.full(4, -np.log(4)))) == pytest.approx(4.0)
    assert rbpf.effective_sample_size(_particles([0.0, -np.inf, -np.inf])) == pytest.approx(1.0)


def test_resample_skips_uniform_weights(rng):
    particles = _particles(np.full(5, -np.log(5)))
    resampled = rbpf.resample(particles, 0.5, rng)
    assert all(a is b for a, b in zip(resampled, particles))


def test_resample_one_hot_weights(rng):
    particles = _particles([0.0, -np.inf, -np.inf, -np.inf])
    resampled = rbpf.resample(particles, 0.5, rng)
    assert len(resampled) == 4
    assert all(p.state is particles[0].state for p in resampled)
    np.testing.assert_allclose([p.log_weight for p in resampled], -np.log(4))


def test_resample_preserves_weighted_mean(rng):
    weights = np.array([0.4, 0.25, 0.15, 0.1, 0.05, 0.03, 0.01, 0.005, 0.003, 0.002])
    particles = _particles(np.log(weights))
    expected = weights @ np.array([p.state.position[0] for p in particles])

    means = []
    for _ in range(200):
        resampled = rbpf.resample(particles, 0.5, rng)
        means.append(np.mean([p.state.position[0] for p in resampled]))
    assert np.mean(means) == pytest.approx(expected, abs=0.1)


def test_systematic_indices_counts(rng):
    weights = np.array([0.5, 0.25, 0.125, 0.125])
    counts = np.bincount(rbpf.systematic_indices(weights, rng), minlength=4)
    assert counts.sum() == 4
    # each count is within one of N * w
    assert np.all(np.abs(counts - 4 * weights) < 1.0)


def test_estimate_state_circular_heading():
    states = [make_state([0.0, 0.0, 0.0], heading=np.pi - 0.1), make_state([2.0, 0.0, 0.0], heading=-(np.pi - 0.1))]
    estimate = rbpf.estimate_state(_particles(np.log([0.5, 0.5]), states=states))
    assert abs(estimate.heading) == pytest.approx(np.pi, abs=1e-9)
    assert estimate.position[0] == pytest.approx(1.0)


def test_estimate_state_weighted_mean(rng):
    states = [make_state(rng.normal(size=3), speed=abs(rng.normal()), clock_bias=rng.normal()) for _ in range(6)]
    weights = rng.dirichlet(np.ones(6))
    estimate = rbpf.estimate_state(_particles(np.log(weights), states=states))
    expected = weights @ np.array([s.position for s in states])
    np.testing.assert_allclose(estimate.position, expected, atol=1e-12)
    assert estimate.clock_bias == pytest.approx(weights @ [s.clock_bias for s in states])


def test_sample_prior(scenario, rng):
    mean = scenario.prior_mean()
    states = rbpf.sample_prior(mean, scenario.initial_prior_std, 500, rng)
    assert len(states) == 500
    assert all(s.position[2] == mean.position[2] for s in states)
    assert all(s.speed >= 0 for s in states)
    assert np.mean([s.position[0] for s in states]) == pytest.approx(mean.position[0], abs=0.2)


def test_slam_filter_step_conserves_weights(scenario, environment, bs, rng):
    params = scenario.map_params()
    trajectory = [scenario.truth_state()]
    for _ in range(3):
        trajectory.append(rbpf.predict_particle(trajectory[-1], scenario.dt, np.zeros((6, 6)), None))

    states = rbpf.sample_prior(scenario.prior_mean(), scenario.initial_prior_std, 8, rng)
    slam = SlamFilter(states, bs, AllPathsLikelihood(), params, scenario.dt, scenario.process_noise, rng)
    for truth in trajectory[1:]:
        scan = chanmodel.generate_scan(environment, truth, params.scan, rng)
        result = slam.step(scan)
        assert len(slam.particles) == 8
        assert np.sum(rbpf.normalized_weights(slam.particles)) == pytest.approx(1.0)
        assert 1.0 <= result.ess <= 8.0 + 1e-9
        assert result.best_map.hypothesis_weights.sum() == pytest.approx(1.0, abs=1e-6)


def test_slam_filter_known_state(scenario, environment, bs, rng):
    params = scenario.map_params()
    truth = scenario.truth_state()
    slam = SlamFilter([truth], bs, AllPathsLikelihood(), params, scenario.dt, scenario.process_noise, rng)
    scan = chanmodel.generate_scan(environment, truth, params.scan, rng)
    result = slam.step(scan, known_state=truth)
    np.testing.assert_allclose(result.estimate.to_vector(), truth.to_vector())
    assert result.ess == pytest.approx(1.0)
    assert slam.particles[0].state is truth
