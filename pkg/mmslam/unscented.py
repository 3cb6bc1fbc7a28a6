"""
Sigma-point transform and Gaussian conditioning.

Symmetric 2n+1 sigma points with spread parameter kappa; the weights are
W0 = kappa / (n + kappa) and Wi = 1 / (2 (n + kappa)). Conditioning is exact
when the measurement function is linear.
"""

import logging
from typing import Callable, NamedTuple, Optional, Tuple

import numpy as np
from scipy import linalg


logger = logging.getLogger(__name__)

DEFAULT_KAPPA = 1.0
REGULARIZATION = 1e-9
# Jitter grows tenfold per retry
MAX_JITTER_TRIES = 8


class ConditionResult(NamedTuple):
    mean: np.ndarray
    cov: np.ndarray
    log_marginal: float
    regularized: bool


class CovarianceError(linalg.LinAlgError):
    """Raised when a covariance stays non positive definite after every jitter retry."""


def _cholesky(matrix: np.ndarray) -> Tuple[np.ndarray, float]:
    """
    Lower Cholesky factor and the diagonal jitter that was needed (0 when none).

    Jitter starts at REGULARIZATION times the mean diagonal magnitude and
    grows tenfold per try, for at most MAX_JITTER_TRIES tries.

    Raises:
        CovarianceError: when no tried jitter makes the matrix positive definite
    """
    if not np.all(np.isfinite(matrix)):
        raise CovarianceError("covariance has non-finite entries")
    try:
        return linalg.cholesky(matrix, lower=True), 0.0
    except linalg.LinAlgError:
        pass

    scale = max(1.0, float(np.mean(np.abs(np.diag(matrix)))))
    identity = np.eye(matrix.shape[0])
    for attempt in range(MAX_JITTER_TRIES):
        jitter = REGULARIZATION * scale * 10.0 ** attempt
        try:
            factor = linalg.cholesky(matrix + jitter * identity, lower=True)
        except linalg.LinAlgError:
            continue
        logger.warning(f"Covariance not positive definite, regularized with jitter {jitter:.3g}")
        return factor, jitter
    raise CovarianceError(f"covariance not positive definite after {MAX_JITTER_TRIES} jitter tries")


def sigma_weights(n: int, kappa: float = DEFAULT_KAPPA) -> np.ndarray:
    weights = np.full(2 * n + 1, 0.5 / (n + kappa))
    weights[0] = kappa / (n + kappa)
    return weights


def sigma_points(mean, cov, kappa: float = DEFAULT_KAPPA) -> Tuple[np.ndarray, np.ndarray, bool]:
    """
    Symmetric sigma points of a Gaussian.

    Args:
        mean: (n,) mean
        cov: (n, n) covariance
        kappa: spread parameter

    Returns:
        Tuple of (points (2n+1, n), weights (2n+1,), regularized flag)
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    n = mean.size
    factor, jitter = _cholesky((n + kappa) * cov)
    columns = factor.T
    points = np.vstack([mean, mean + columns, mean - columns])
    return points, sigma_weights(n, kappa), jitter > 0


def _difference(residual: Optional[Callable], a, b) -> np.ndarray:
    return residual(a, b) if residual is not None else np.asarray(a) - np.asarray(b)


class Prediction(NamedTuple):
    """Sigma-point prediction of y = fun(x): predicted mean, innovation and cross covariances."""

    predicted: np.ndarray
    innovation_cov: np.ndarray
    cross_cov: np.ndarray
    regularized: bool


def unscented_predict(
    mean,
    cov,
    fun: Callable[[np.ndarray], np.ndarray],
    noise_cov,
    residual: Optional[Callable] = None,
    kappa: float = DEFAULT_KAPPA,
) -> Prediction:
    """
    Push a Gaussian through a batched function with sigma points.

    Args:
        mean: prior mean (n,)
        cov: prior covariance (n, n)
        fun: batched function mapping (k, n) points to (k, m) outputs
        noise_cov: additive output noise covariance (m, m)
        residual: difference function for outputs with angular components
        kappa: sigma-point spread parameter

    Returns:
        Prediction: moments of the joint Gaussian approximation of (x, y)
    """
    mean = np.asarray(mean, dtype=float)
    noise_cov = np.atleast_2d(np.asarray(noise_cov, dtype=float))

    points, weights, regularized = sigma_points(mean, cov, kappa)
    outputs = np.asarray(fun(points), dtype=float).reshape(points.shape[0], -1)

    # Average around the central point so wrapped components stay continuous
    predicted = outputs[0] + weights @ _difference(residual, outputs, outputs[0])
    dy = _difference(residual, outputs, predicted)
    dx = points - mean

    innovation_cov = (weights[:, None] * dy).T @ dy + noise_cov
    innovation_cov = 0.5 * (innovation_cov + innovation_cov.T)
    cross_cov = (weights[:, None] * dx).T @ dy
    return Prediction(predicted, innovation_cov, cross_cov, regularized)


def mahalanobis_squared(prediction: Prediction, measurement, residual: Optional[Callable] = None) -> float:
    """Squared Mahalanobis distance of a measurement from a prediction."""
    innovation = _difference(residual, np.asarray(measurement, dtype=float).reshape(-1), prediction.predicted)
    factor, _ = _cholesky(prediction.innovation_cov)
    whitened = linalg.solve_triangular(factor, innovation, lower=True)
    return float(whitened @ whitened)


def condition(
    mean,
    cov,
    prediction: Prediction,
    measurement,
    residual: Optional[Callable] = None,
) -> ConditionResult:
    """
    Gaussian conditioning of a prior on a measurement given its sigma-point prediction.

    Returns:
        ConditionResult: posterior mean and covariance, log N(y; predicted, innovation_cov)
            and whether any covariance needed regularization
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    measurement = np.asarray(measurement, dtype=float).reshape(-1)

    innovation_cov = prediction.innovation_cov
    factor, jitter = _cholesky(innovation_cov)
    if jitter > 0:
        innovation_cov = innovation_cov + jitter * np.eye(innovation_cov.shape[0])
    regularized = jitter > 0 or prediction.regularized

    gain = linalg.cho_solve((factor, True), prediction.cross_cov.T).T
    innovation = _difference(residual, measurement, prediction.predicted)

    posterior_mean = mean + gain @ innovation
    posterior_cov = cov - gain @ innovation_cov @ gain.T
    posterior_cov = 0.5 * (posterior_cov + posterior_cov.T)

    _, posterior_jitter = _cholesky(posterior_cov)
    if posterior_jitter > 0:
        posterior_cov = posterior_cov + posterior_jitter * np.eye(mean.size)
        regularized = True

    # log N(innovation; 0, innovation_cov) from the Cholesky factor
    whitened = linalg.solve_triangular(factor, innovation, lower=True)
    log_marginal = float(
        -0.5 * whitened @ whitened - np.sum(np.log(np.diag(factor))) - 0.5 * innovation.size * np.log(2.0 * np.pi)
    )
    return ConditionResult(posterior_mean, posterior_cov, log_marginal, regularized)


def unscented_condition(
    mean,
    cov,
    fun: Callable[[np.ndarray], np.ndarray],
    measurement,
    noise_cov,
    residual: Optional[Callable] = None,
    kappa: float = DEFAULT_KAPPA,
) -> ConditionResult:
    """
    Condition a Gaussian prior on y = fun(x) + noise using sigma points.

    Exact Kalman conditioning when fun is linear.

    Args:
        mean: prior mean (n,)
        cov: prior covariance (n, n)
        fun: batched measurement function mapping (k, n) points to (k, m) outputs
        measurement: observed y (m,)
        noise_cov: measurement noise covariance (m, m)
        residual: difference function for outputs with angular components
        kappa: sigma-point spread parameter

    Returns:
        ConditionResult
    """
    prediction = unscented_predict(mean, cov, fun, noise_cov, residual, kappa)
    return condition(mean, cov, prediction, measurement, residual)
