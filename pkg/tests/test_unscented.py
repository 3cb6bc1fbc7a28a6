import numpy as np
import pytest
from scipy import linalg
from scipy.stats import multivariate_normal, norm

from mmslam import unscented
from mmslam.models import channel_residual


def _kalman(mean, cov, h, noise_cov, measurement):
    innovation_cov = h @ cov @ h.T + noise_cov
    gain = cov @ h.T @ np.linalg.inv(innovation_cov)
    innovation = measurement - h @ mean
    log_marginal = multivariate_normal.logpdf(measurement, mean=h @ mean, cov=innovation_cov)
    return mean + gain @ innovation, cov - gain @ innovation_cov @ gain.T, log_marginal


def test_sigma_weights():
    weights = unscented.sigma_weights(3, kappa=1.0)
    assert weights[0] == pytest.approx(0.25)
    np.testing.assert_allclose(weights[1:], 0.125)
    assert weights.sum() == pytest.approx(1.0)


def test_sigma_points_reproduce_moments(rng):
    a = rng.normal(size=(3, 3))
    cov = a @ a.T + np.eye(3)
    mean = rng.normal(size=3)
    points, weights, regularized = unscented.sigma_points(mean, cov)
    assert points.shape == (7, 3)
    assert not regularized
    np.testing.assert_allclose(weights @ points, mean, atol=1e-12)
    deviations = points - mean
    np.testing.assert_allclose((weights[:, None] * deviations).T @ deviations, cov, atol=1e-12)


def test_sigma_points_regularize_singular_covariance():
    _, _, regularized = unscented.sigma_points(np.zeros(2), np.zeros((2, 2)))
    assert regularized


def test_scalar_linear_update_is_exact():
    result = unscented.unscented_condition(
        np.zeros(1), np.eye(1), lambda x: x, np.array([1.0]), np.eye(1)
    )
    assert result.mean[0] == pytest.approx(0.5, abs=1e-12)
    assert result.cov[0, 0] == pytest.approx(0.5, abs=1e-12)
    assert result.log_marginal == pytest.approx(norm.logpdf(1.0, 0.0, np.sqrt(2.0)), abs=1e-12)
    assert not result.regularized


def test_linear_update_matches_kalman(rng):
    for _ in range(20):
        a = rng.normal(size=(3, 3))
        cov = a @ a.T + 0.1 * np.eye(3)
        mean = rng.normal(size=3) * 10
        h = rng.normal(size=(2, 3))
        noise = np.diag(rng.uniform(0.1, 2.0, 2))
        measurement = h @ mean + rng.normal(size=2)

        result = unscented.unscented_condition(mean, cov, lambda x: x @ h.T, measurement, noise)
        expected_mean, expected_cov, expected_log = _kalman(mean, cov, h, noise, measurement)
        np.testing.assert_allclose(result.mean, expected_mean, atol=1e-9)
        np.testing.assert_allclose(result.cov, expected_cov, atol=1e-9)
        assert result.log_marginal == pytest.approx(expected_log, abs=1e-9)


def test_predict_then_condition_equals_one_shot(rng):
    mean = np.array([1.0, 2.0, 3.0])
    cov = np.diag([1.0, 2.0, 0.5])
    h = np.array([[1.0, 0.0, 1.0], [0.0, 2.0, 0.0]])
    noise = np.eye(2) * 0.3
    measurement = np.array([4.5, 3.0])

    prediction = unscented.unscented_predict(mean, cov, lambda x: x @ h.T, noise)
    staged = unscented.condition(mean, cov, prediction, measurement)
    direct = unscented.unscented_condition(mean, cov, lambda x: x @ h.T, measurement, noise)
    np.testing.assert_allclose(staged.mean, direct.mean)
    assert staged.log_marginal == pytest.approx(direct.log_marginal)


def test_mahalanobis_squared(rng):
    mean = np.zeros(2)
    cov = np.array([[2.0, 0.3], [0.3, 1.0]])
    prediction = unscented.unscented_predict(mean, cov, lambda x: x, np.eye(2))
    measurement = np.array([1.0, -2.0])
    innovation_cov = cov + np.eye(2)
    expected = measurement @ np.linalg.solve(innovation_cov, measurement)
    assert unscented.mahalanobis_squared(prediction, measurement) == pytest.approx(expected, abs=1e-12)


def test_angular_residual_across_wrap():
    # azimuth prior straddles +-pi; the wrapped residual keeps the prediction near pi
    mean = np.zeros(5)
    cov = np.eye(5) * 1e-4

    def fun(x):
        out = x.copy()
        out[:, 1] = np.pi - 1e-3 + x[:, 1]
        out[:, 1] = np.pi - np.mod(np.pi - out[:, 1], 2 * np.pi)
        return out

    prediction = unscented.unscented_predict(mean, cov, fun, np.eye(5) * 1e-4, channel_residual)
    assert abs(abs(prediction.predicted[1]) - (np.pi - 1e-3)) < 1e-6
    measurement = fun(mean[None, :])[0]
    assert unscented.mahalanobis_squared(prediction, measurement, channel_residual) < 1e-6


def test_log_marginal_with_ill_conditioned_innovation():
    # eigenvalues 7e-4 and 5.8e8 in the innovation covariance
    cov = np.diag([1e-4, 5.8e8 - 1.0])
    noise = np.diag([6e-4, 1.0])
    measurement = np.array([0.02, 3e4])
    result = unscented.unscented_condition(np.zeros(2), cov, lambda x: x, measurement, noise)
    expected = norm.logpdf(0.02, 0.0, np.sqrt(7e-4)) + norm.logpdf(3e4, 0.0, np.sqrt(5.8e8))
    assert result.log_marginal == pytest.approx(expected, rel=1e-9)
    assert np.all(np.isfinite(result.cov))


def test_jitter_grows_until_factorization_succeeds():
    # a single REGULARIZATION-sized jitter does not cover the negative eigenvalue
    points, _, regularized = unscented.sigma_points(np.zeros(2), np.diag([1.0, -1e-6]))
    assert regularized
    assert np.all(np.isfinite(points))


def test_covariance_error_after_bounded_retries():
    with pytest.raises(unscented.CovarianceError):
        unscented.sigma_points(np.zeros(2), -1e6 * np.eye(2))
    with pytest.raises(linalg.LinAlgError):
        unscented.sigma_points(np.zeros(2), np.full((2, 2), np.nan))
