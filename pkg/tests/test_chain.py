import json
import math

import numpy as np
import pytest

from exactmc.chain import (DegenerateChainError, StateSpace, TimeScales, check_detailed_balance,
                           distribution_after, distribution_from_json, distribution_to_json,
                           empirical_distribution, load_matrix, matrix_from_json, matrix_to_json,
                           spectral_gap, stationary_distribution, total_variation,
                           validate_distribution, validate_transition_matrix)

# two-state chain: P(1 <- 0) = 0.2, P(0 <- 1) = 0.1, columns indexed by the current state
P2 = np.array([[0.8, 0.1], [0.2, 0.9]])


def test_two_state_stationary():
    assert np.allclose(stationary_distribution(P2), [1 / 3, 2 / 3], atol=1e-12)


def test_rank_one_stationary_is_column():
    v = np.array([0.1, 0.2, 0.3, 0.4])
    P = np.tile(v[:, None], (1, 4))
    pi = stationary_distribution(P)
    assert np.allclose(pi, v, atol=1e-12)
    assert np.abs(P @ pi - pi).sum() <= 1e-12


def test_identity_is_degenerate():
    with pytest.raises(DegenerateChainError, match="degenerate chain"):
        stationary_distribution(np.eye(3))


def test_periodic_chain_is_degenerate():
    with pytest.raises(DegenerateChainError):
        stationary_distribution(np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_detailed_balance_examples():
    assert check_detailed_balance(P2, [1 / 3, 2 / 3], tol=1e-12)
    S = np.array([[0.5, 0.3, 0.2], [0.3, 0.4, 0.3], [0.2, 0.3, 0.5]])
    assert check_detailed_balance(S, np.full(3, 1 / 3))
    cycle = np.roll(np.eye(3), 1, axis=0)  # P(x+1 <- x) = 1
    assert cycle[1, 0] == 1.0
    assert not check_detailed_balance(cycle, np.full(3, 1 / 3))


def test_detailed_balance_dimension_mismatch():
    with pytest.raises(ValueError):
        check_detailed_balance(P2, [0.5, 0.25, 0.25])


def test_spectral_gap_two_state():
    gap, tau = spectral_gap(P2)
    assert gap == pytest.approx(0.3, abs=1e-12)
    assert tau == pytest.approx(10 / 3, abs=1e-10)


def test_spectral_gap_rank_one():
    v = np.array([0.25, 0.75])
    assert spectral_gap(np.tile(v[:, None], (1, 2))) == pytest.approx((1.0, 1.0))


def test_zero_gap_reports_infinite_tau():
    gap, tau = spectral_gap(np.eye(2))
    assert gap == 0.0 and tau == math.inf


def test_distribution_after():
    assert np.array_equal(distribution_after(P2, 1, 0), [0.0, 1.0])
    v = np.array([0.3, 0.7])
    assert np.allclose(distribution_after(np.tile(v[:, None], (1, 2)), 0, 1), v)
    half = np.full((2, 2), 0.5)
    assert np.allclose(distribution_after(half, 0, 1), [0.5, 0.5])
    with pytest.raises(ValueError):
        distribution_after(P2, 0, -1)


def test_distance_to_pi_decreases():
    pi = stationary_distribution(P2)
    d = [total_variation(distribution_after(P2, 0, T), pi) for T in range(20)]
    assert all(b < a for a, b in zip(d, d[1:]))


@pytest.mark.parametrize("bad", [
    np.array([[0.5, 0.5], [0.4, 0.5]]),
    np.array([[1.1, 0.0], [-0.1, 1.0]]),
    np.ones((2, 3)) / 2,
    np.array([[np.nan, 0.0], [1.0, 1.0]]),
])
def test_invalid_matrices_rejected(bad):
    with pytest.raises(ValueError):
        validate_transition_matrix(bad)


def test_invalid_distribution_rejected():
    with pytest.raises(ValueError):
        validate_distribution([0.5, 0.6])
    with pytest.raises(ValueError):
        validate_distribution([1.5, -0.5])


def test_state_space_invariants():
    assert StateSpace(3, 8).admissible_count() == 8
    assert StateSpace(2, 4, lambda x: x != 3).admissible_count() == 3
    with pytest.raises(ValueError):
        StateSpace(2, 5)
    with pytest.raises(ValueError):
        StateSpace(2, 4, lambda x: np.zeros_like(x, dtype=bool))


def test_time_scales_positive():
    TimeScales(1.0, 0.5, math.inf)
    with pytest.raises(ValueError):
        TimeScales(tau=0.0)


def test_json_round_trip(tmp_path):
    doc = matrix_to_json(P2)
    # row-major: entries[x * N + y] = P(x, y)
    assert doc["entries"][0 * 2 + 1] == P2[0, 1]
    assert np.array_equal(matrix_from_json(json.loads(json.dumps(doc))), P2)
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc))
    assert np.array_equal(load_matrix(path), P2)
    d = distribution_to_json([0.25, 0.75])
    assert np.array_equal(distribution_from_json(d), [0.25, 0.75])
    with pytest.raises(ValueError):
        matrix_from_json({"dimension": 3, "entries": [1.0]})
    with pytest.raises(ValueError):
        matrix_from_json({"entries": [1.0]})


def test_empirical_distribution():
    assert np.array_equal(empirical_distribution([0, 1, 1, 3], 4), [0.25, 0.5, 0.0, 0.25])
