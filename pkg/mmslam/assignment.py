"""
Optimal and k-best 2-D assignment.

Rows are measurement clusters, columns are the existing Bernoulli components
followed by one new-landmark/clutter column per cluster. Costs are negative
log-weights; non-assignable entries are +inf.
"""

import heapq
import itertools
import logging
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment


logger = logging.getLogger(__name__)

# Finite stand-in for +inf inside the solver
BIG = 1e9

# Lower clamp for misdetection log-weights so the constant term stays finite
MIN_LOG_WEIGHT = -700.0


class InfeasibleAssignmentError(ValueError):
    """Raised when some row has no assignable column."""


class Assignment(NamedTuple):
    """Row-to-column map (columns[i] is the column of row i) and its total cost."""

    columns: Tuple[int, ...]
    cost: float


def _to_solver_matrix(cost) -> np.ndarray:
    matrix = np.array(cost, dtype=float, copy=True)
    if matrix.ndim != 2:
        raise ValueError(f"cost matrix must be 2-D, got shape {matrix.shape}")
    matrix[~np.isfinite(matrix) | (matrix >= BIG)] = BIG
    return matrix


def _solve(matrix: np.ndarray, original: np.ndarray) -> Optional[Assignment]:
    """Hungarian solve on a solver matrix; None when a row cannot be assigned."""
    rows = matrix.shape[0]
    if rows == 0:
        return Assignment((), 0.0)
    if rows > matrix.shape[1] or np.any(np.all(matrix >= BIG, axis=1)):
        return None

    row_ind, col_ind = linear_sum_assignment(matrix)
    if np.any(matrix[row_ind, col_ind] >= BIG):
        return None

    columns = np.empty(rows, dtype=int)
    columns[row_ind] = col_ind
    total = float(sum(original[i, columns[i]] for i in range(rows)))
    return Assignment(tuple(int(c) for c in columns), total)


def solve_optimal(cost) -> Assignment:
    """
    Minimum-cost assignment with each column used at most once.

    Args:
        cost: M x N cost matrix, M <= N, +inf for non-assignable entries

    Returns:
        Assignment: row-to-column map and total cost

    Raises:
        InfeasibleAssignmentError: "infeasible row" when no complete assignment exists
    """
    matrix = _to_solver_matrix(cost)
    solution = _solve(matrix, matrix)
    if solution is None:
        raise InfeasibleAssignmentError("infeasible row")
    return solution


def murty_k_best(cost, k: int) -> List[Assignment]:
    """
    The k lowest-cost distinct assignments in nondecreasing cost order.

    Murty's partitioning: each popped solution splits its subproblem into
    disjoint children, one per row, that forbid the row's chosen column while
    fixing the choices of all earlier rows. Ties are ordered lexicographically
    by the column vector.

    Args:
        cost: M x N cost matrix, +inf for non-assignable entries
        k: number of solutions requested (>= 1)

    Returns:
        List[Assignment]: at most k assignments

    Raises:
        InfeasibleAssignmentError: when not even one assignment exists
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")

    matrix = _to_solver_matrix(cost)
    first = _solve(matrix, matrix)
    if first is None:
        raise InfeasibleAssignmentError("infeasible row")

    counter = itertools.count()
    heap = [(first.cost, first.columns, next(counter), matrix)]
    solutions = []

    while heap and len(solutions) < k:
        total, columns, _, subproblem = heapq.heappop(heap)
        solutions.append(Assignment(columns, total))

        work = subproblem.copy()
        for row, column in enumerate(columns):
            child = work.copy()
            child[row, column] = BIG
            solution = _solve(child, matrix)
            if solution is not None:
                heapq.heappush(heap, (solution.cost, solution.columns, next(counter), child))

            kept = work[row, column]
            work[row, :] = BIG
            work[:, column] = BIG
            work[row, column] = kept

    logger.debug(f"Murty returned {len(solutions)} of {k} requested assignments for a {matrix.shape} matrix")
    return solutions


def build_cost_matrix(detection_log_weights, misdetection_log_weights, new_log_weights) -> Tuple[np.ndarray, float]:
    """
    Cost matrix of one global hypothesis' association problem.

    Args:
        detection_log_weights: M x J log l^{j,i} of cluster i updating Bernoulli j (-inf if impossible)
        misdetection_log_weights: J log l^{j,0} of Bernoulli j being missed
        new_log_weights: M log l_U^i of cluster i starting a new landmark or being clutter

    Returns:
        Tuple of (M x (J + M) cost matrix, constant) such that the log-weight of an
        association equals constant - assignment cost
    """
    new_log_weights = np.asarray(new_log_weights, dtype=float).reshape(-1)
    m = new_log_weights.size
    misdetection = np.maximum(np.asarray(misdetection_log_weights, dtype=float).reshape(-1), MIN_LOG_WEIGHT)
    j = misdetection.size
    detection = np.asarray(detection_log_weights, dtype=float).reshape(m, j)

    cost = np.full((m, j + m), np.inf)
    with np.errstate(invalid="ignore"):
        existing = -(detection - misdetection[None, :])
    existing[~np.isfinite(detection)] = np.inf
    cost[:, :j] = existing

    diagonal = -new_log_weights
    diagonal[~np.isfinite(new_log_weights)] = np.inf
    cost[np.arange(m), j + np.arange(m)] = diagonal

    return cost, float(np.sum(misdetection))
