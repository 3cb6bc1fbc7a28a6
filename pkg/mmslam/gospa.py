"""
GOSPA distance for mapping evaluation.

Reports the total distance together with its localization, missed and false
addends (taken before the 1/p root).
"""

import logging
from typing import Dict, NamedTuple, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.distance import cdist

from mmslam.assignment import solve_optimal
from mmslam.models import SURFACE_TYPES, LandmarkType


logger = logging.getLogger(__name__)


class GospaConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    p: float = Field(2.0, ge=1.0)
    c: float = Field(20.0, gt=0.0)
    alpha: float = Field(2.0, gt=0.0, le=2.0)


class GospaResult(NamedTuple):
    total: float
    localization: float
    missed: float
    false: float


def _as_points(points) -> np.ndarray:
    array = np.asarray(points, dtype=float)
    if array.size == 0:
        return np.zeros((0, 3))
    return array.reshape(-1, 3)


def gospa(truth, estimates, p: float = 2.0, c: float = 20.0, alpha: float = 2.0) -> GospaResult:
    """
    GOSPA distance between two point sets.

    Minimizes, over partial assignments, the sum of d^p over assigned pairs
    plus c^p / alpha per unassigned point on either side. Pairs at distance
    >= c are never better than leaving both points unassigned.

    Args:
        truth: true positions (n, 3)
        estimates: estimated positions (m, 3)
        p: order (>= 1)
        c: cutoff in meters
        alpha: cardinality mismatch weight

    Returns:
        GospaResult: total distance and the localization, missed and false terms
    """
    truth = _as_points(truth)
    estimates = _as_points(estimates)
    n, m = len(truth), len(estimates)
    penalty = c ** p / alpha

    assigned_costs = np.zeros(0)
    if n and m:
        capped = np.minimum(cdist(truth, estimates), c) ** p
        # Assigning a pair replaces two penalties; dummy columns leave a truth point unassigned
        cost = np.hstack([capped - 2.0 * penalty, np.zeros((n, n))])
        solution = solve_optimal(cost)
        assigned_costs = np.array([capped[i, j] for i, j in enumerate(solution.columns) if j < m])
        # a pair no cheaper than two penalties counts as missed plus false
        assigned_costs = assigned_costs[assigned_costs < 2.0 * penalty]

    matched = len(assigned_costs)
    localization = float(np.sum(assigned_costs))
    missed = penalty * (n - matched)
    false = penalty * (m - matched)
    total = float((localization + missed + false) ** (1.0 / p))
    return GospaResult(total, localization, float(missed), float(false))


def per_type_gospa(
    truth_map: Sequence[Tuple[np.ndarray, LandmarkType]],
    estimate_map: Sequence[Tuple[np.ndarray, LandmarkType]],
    p: float = 2.0,
    c: float = 20.0,
    alpha: float = 2.0,
) -> Dict[LandmarkType, GospaResult]:
    """
    GOSPA per surface type.

    An estimate with the wrong type is a false estimate for its claimed type
    and leaves the true landmark missed for its own type.

    Args:
        truth_map: (position, type) pairs
        estimate_map: (position, type) pairs

    Returns:
        Dict[LandmarkType, GospaResult]: one entry per SM, MR, VR
    """
    results = {}
    for landmark_type in SURFACE_TYPES:
        truth = [position for position, t in truth_map if LandmarkType(t) == landmark_type]
        estimates = [position for position, t in estimate_map if LandmarkType(t) == landmark_type]
        results[landmark_type] = gospa(truth, estimates, p, c, alpha)
    return results
