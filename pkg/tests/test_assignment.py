import itertools

import numpy as np
import pytest

from mmslam.assignment import (
    InfeasibleAssignmentError,
    build_cost_matrix,
    murty_k_best,
    solve_optimal,
)


def _enumerate(cost):
    """All complete injective assignments as (cost, columns), sorted."""
    rows, columns = cost.shape
    results = []
    for perm in itertools.permutations(range(columns), rows):
        total = sum(cost[i, j] for i, j in enumerate(perm))
        if np.isfinite(total):
            results.append((total, perm))
    return sorted(results)


def _random_cost(rng, rows, columns, inf_fraction=0.0):
    cost = rng.uniform(-10, 10, (rows, columns))
    cost[rng.random((rows, columns)) < inf_fraction] = np.inf
    return cost


def test_solve_optimal_diagonal():
    solution = solve_optimal([[1.0, 2.0], [2.0, 1.0]])
    assert solution.columns == (0, 1)
    assert solution.cost == 2.0


def test_solve_optimal_single_entry():
    solution = solve_optimal([[5.0]])
    assert solution.columns == (0,)
    assert solution.cost == 5.0


def test_solve_optimal_empty():
    assert solve_optimal(np.zeros((0, 3))).columns == ()


def test_solve_optimal_infeasible_row():
    with pytest.raises(InfeasibleAssignmentError, match="infeasible row"):
        solve_optimal([[1.0, 2.0], [np.inf, np.inf]])


def test_solve_optimal_infeasible_column_conflict():
    with pytest.raises(InfeasibleAssignmentError):
        solve_optimal([[1.0, np.inf], [2.0, np.inf]])


def test_solve_optimal_matches_enumeration(rng):
    for _ in range(30):
        cost = _random_cost(rng, 6, 8, inf_fraction=0.2)
        enumerated = _enumerate(cost)
        if not enumerated:
            with pytest.raises(InfeasibleAssignmentError):
                solve_optimal(cost)
            continue
        assert solve_optimal(cost).cost == pytest.approx(enumerated[0][0], abs=1e-9)


def test_solve_optimal_invariant_to_scaling(rng):
    for _ in range(30):
        cost = _random_cost(rng, 5, 9, inf_fraction=0.1)
        try:
            reference = solve_optimal(cost)
        except InfeasibleAssignmentError:
            continue
        for scale in (1e-3, 0.5, 7.0, 1e4):
            scaled = solve_optimal(scale * cost)
            assert scaled.columns == reference.columns
            assert scaled.cost == pytest.approx(scale * reference.cost, rel=1e-9)


def test_solve_optimal_beats_random_assignment(rng):
    for _ in range(50):
        cost = _random_cost(rng, 6, 10)
        optimal = solve_optimal(cost).cost
        columns = rng.permutation(10)[:6]
        assert optimal <= sum(cost[i, j] for i, j in enumerate(columns)) + 1e-9


def test_murty_two_permutations():
    solutions = murty_k_best([[1.0, 2.0], [2.0, 1.0]], 2)
    assert [s.cost for s in solutions] == [2.0, 4.0]
    assert [s.columns for s in solutions] == [(0, 1), (1, 0)]


def test_murty_k_one_is_optimal(rng):
    cost = _random_cost(rng, 4, 6)
    solutions = murty_k_best(cost, 1)
    assert len(solutions) == 1
    assert solutions[0] == solve_optimal(cost)


def test_murty_fewer_solutions_than_requested():
    solutions = murty_k_best([[1.0, 2.0], [2.0, 1.0]], 5)
    assert len(solutions) == 2


def test_murty_rejects_bad_k():
    with pytest.raises(ValueError):
        murty_k_best([[1.0]], 0)


def test_murty_matches_enumeration(rng):
    for _ in range(40):
        cost = _random_cost(rng, 5, 7, inf_fraction=0.15)
        enumerated = _enumerate(cost)
        if not enumerated:
            continue
        solutions = murty_k_best(cost, 10)
        expected = [c for c, _ in enumerated[:10]]
        np.testing.assert_allclose([s.cost for s in solutions], expected, atol=1e-9)
        assert len({s.columns for s in solutions}) == len(solutions)
        for s in solutions:
            assert sum(cost[i, j] for i, j in enumerate(s.columns)) == pytest.approx(s.cost, abs=1e-9)


def test_murty_enumerates_all_tied_solutions():
    solutions = murty_k_best(np.ones((2, 3)), 10)
    assert sorted(s.columns for s in solutions) == sorted(itertools.permutations(range(3), 2))
    assert all(s.cost == 2.0 for s in solutions)


def test_build_cost_matrix_single_pair():
    cost, constant = build_cost_matrix([[-1.0]], [-2.0], [-3.0])
    np.testing.assert_allclose(cost, [[-1.0, 3.0]])
    assert constant == -2.0


def test_build_cost_matrix_without_bernoullis():
    cost, constant = build_cost_matrix(np.zeros((3, 0)), [], [-1.0, -2.0, -3.0])
    assert constant == 0.0
    np.testing.assert_allclose(np.diag(cost), [1.0, 2.0, 3.0])
    assert np.all(np.isinf(cost[~np.eye(3, dtype=bool)]))


def test_build_cost_matrix_impossible_entries():
    cost, _ = build_cost_matrix([[-np.inf, -1.0]], [-0.5, -np.inf], [-np.inf])
    assert cost[0, 0] == np.inf
    assert np.isfinite(cost[0, 1])
    assert cost[0, 2] == np.inf


def test_build_cost_matrix_best_weight_matches_enumeration(rng):
    for _ in range(50):
        detection = rng.uniform(-6, 0, (3, 3))
        detection[rng.random((3, 3)) < 0.2] = -np.inf
        misdetection = rng.uniform(-3, 0, 3)
        new = rng.uniform(-6, 0, 3)

        best = -np.inf
        # each cluster picks a distinct Bernoulli or its own new column
        for choice in itertools.product(range(4), repeat=3):
            used = [c for c in choice if c < 3]
            if len(used) != len(set(used)):
                continue
            log_weight = sum(detection[i, c] if c < 3 else new[i] for i, c in enumerate(choice))
            log_weight += sum(misdetection[j] for j in range(3) if j not in used)
            best = max(best, log_weight)

        cost, constant = build_cost_matrix(detection, misdetection, new)
        assert constant - solve_optimal(cost).cost == pytest.approx(best, abs=1e-9)


@pytest.mark.slow
def test_murty_matches_enumeration_at_scale(rng):
    for _ in range(500):
        rows = rng.integers(1, 7)
        columns = rng.integers(rows, 9)
        cost = _random_cost(rng, rows, columns, inf_fraction=0.1)
        enumerated = _enumerate(cost)
        if not enumerated:
            continue
        k = int(rng.integers(1, len(enumerated) + 1))
        solutions = murty_k_best(cost, k)
        np.testing.assert_allclose([s.cost for s in solutions], [c for c, _ in enumerated[:k]], atol=1e-9)
