import itertools

import numpy as np
import pytest

from mmslam.gospa import GospaConfig, gospa, per_type_gospa
from mmslam.models import LandmarkType


def _brute_force(truth, estimates, p=2.0, c=20.0, alpha=2.0):
    """Minimum over all partial assignments of truth points to estimates."""
    n, m = len(truth), len(estimates)
    penalty = c ** p / alpha
    best = np.inf
    for size in range(min(n, m) + 1):
        for rows in itertools.combinations(range(n), size):
            for columns in itertools.permutations(range(m), size):
                cost = sum(min(np.linalg.norm(truth[i] - estimates[j]), c) ** p for i, j in zip(rows, columns))
                cost += penalty * (n + m - 2 * size)
                best = min(best, cost)
    return best ** (1.0 / p)


def test_identical_sets():
    points = np.array([[0.0, 0.0, 0.0], [5.0, 5.0, 5.0]])
    result = gospa(points, points)
    assert result.total == 0.0
    assert result.missed == 0.0 and result.false == 0.0


def test_single_pair_within_cutoff():
    result = gospa([[0.0, 0.0, 0.0]], [[10.0, 10.0, 0.0]])
    assert result.total == pytest.approx(np.sqrt(200.0))
    assert result.localization == pytest.approx(200.0)
    assert result.missed == 0.0


def test_missed_landmark():
    result = gospa([[0.0, 0.0, 0.0]], np.zeros((0, 3)))
    assert result.missed == pytest.approx(200.0)
    assert result.total == pytest.approx(np.sqrt(200.0))


def test_false_landmark():
    result = gospa(np.zeros((0, 3)), [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    assert result.false == pytest.approx(400.0)
    assert result.total == pytest.approx(20.0)


def test_distant_pair_counts_as_missed_and_false():
    result = gospa([[0.0, 0.0, 0.0]], [[100.0, 0.0, 0.0]])
    assert result.localization == 0.0
    assert result.missed == pytest.approx(200.0)
    assert result.false == pytest.approx(200.0)
    assert result.total == pytest.approx(20.0)


def test_empty_sets():
    assert gospa([], []).total == 0.0


def test_symmetry(rng):
    truth = rng.uniform(-30, 30, (4, 3))
    estimates = rng.uniform(-30, 30, (3, 3))
    assert gospa(truth, estimates).total == pytest.approx(gospa(estimates, truth).total)


def test_distant_extra_estimate_adds_one_penalty(rng):
    truth = rng.uniform(-20, 20, (3, 3))
    estimates = rng.uniform(-20, 20, (3, 3))
    extra = np.vstack([estimates, [500.0, 500.0, 500.0]])
    base = gospa(truth, estimates)
    assert gospa(truth, extra).total ** 2 == pytest.approx(base.total ** 2 + 200.0)
    assert gospa(truth, extra).false == pytest.approx(base.false + 200.0)


def test_matches_brute_force(rng):
    for _ in range(60):
        n, m = rng.integers(0, 5, size=2)
        truth = rng.uniform(-25, 25, (n, 3))
        estimates = rng.uniform(-25, 25, (m, 3))
        assert gospa(truth, estimates).total == pytest.approx(_brute_force(truth, estimates), abs=1e-9)


def test_matches_brute_force_other_order(rng):
    truth = rng.uniform(-10, 10, (3, 3))
    estimates = rng.uniform(-10, 10, (4, 3))
    for p, c, alpha in [(1.0, 5.0, 2.0), (3.0, 15.0, 2.0), (2.0, 8.0, 1.0)]:
        assert gospa(truth, estimates, p, c, alpha).total == pytest.approx(
            _brute_force(truth, estimates, p, c, alpha), abs=1e-9
        )


@pytest.mark.slow
def test_matches_brute_force_at_scale(rng):
    for _ in range(500):
        n, m = rng.integers(0, 5, size=2)
        truth = rng.uniform(-25, 25, (n, 3))
        estimates = rng.uniform(-25, 25, (m, 3))
        assert gospa(truth, estimates).total == pytest.approx(_brute_force(truth, estimates), abs=1e-9)


def test_per_type_separates_surface_types():
    truth = [
        (np.array([160.0, 0.0, 10.0]), LandmarkType.SM),
        (np.array([0.0, -160.0, 10.0]), LandmarkType.VR),
    ]
    estimates = [
        (np.array([160.0, 0.0, 10.0]), LandmarkType.SM),
        (np.array([0.0, -160.0, 10.0]), LandmarkType.MR),
    ]
    results = per_type_gospa(truth, estimates)
    assert set(results) == {LandmarkType.SM, LandmarkType.MR, LandmarkType.VR}
    assert results[LandmarkType.SM].total == 0.0
    assert results[LandmarkType.VR].missed == pytest.approx(200.0)
    assert results[LandmarkType.MR].false == pytest.approx(200.0)


def test_gospa_config_bounds():
    assert GospaConfig().c == 20.0
    with pytest.raises(ValueError):
        GospaConfig(alpha=3.0)
    with pytest.raises(ValueError):
        GospaConfig(p=0.5)
