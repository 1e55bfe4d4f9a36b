"""
Tests for penalty-pair selection and the resample policies.
"""
from dataclasses import replace

import numpy as np
import pytest

from core.safe_set import SafeSet
from learning.loop import build_controller, penalty_lambdas
from solver.penalty import (PenaltyCandidate, evaluate_candidates, evaluate_control_candidates,
                            select_lambda, selected_index)
from solver.sampling import rollout_batch
from tests.conftest import small_config


def candidate(feasible, cost, violation, lam=(1.0, 1.0)) -> PenaltyCandidate:
    return PenaltyCandidate(lam=lam, control=np.full((3, 2), cost), nominal=np.zeros((4, 4)),
                            feasible=feasible, sampled_cost=cost, violation=violation)


def zero_value(features):
    return np.zeros(len(features))


@pytest.fixture
def origin_safe_set():
    """Rest states along the x axis, stored without normalization."""
    states = np.array([[0.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [2.0, 0.0, 0.0, 0.0]])
    return SafeSet(states, [2.0, 1.0, 0.0], [0, 0, 0], [0, 1, 2], [0], normalize=False)


class TestSelection:
    def test_least_violating_when_none_feasible(self):
        candidates = [candidate(False, 1.0, 3.0), candidate(False, 9.0, 1.0), candidate(False, 0.5, 2.0)]
        assert selected_index(candidates) == 1

    def test_cheapest_feasible(self):
        candidates = [candidate(False, 0.1, 0.5), candidate(True, 5.0, 0.0), candidate(True, 4.0, 0.0)]
        assert selected_index(candidates) == 2

    def test_ties_go_to_lowest_index(self):
        assert selected_index([candidate(True, 2.0, 0.0), candidate(True, 2.0, 0.0)]) == 0
        assert selected_index([candidate(False, 2.0, 1.0), candidate(False, 1.0, 1.0)]) == 0

    def test_diverged_candidates_lose(self):
        assert selected_index([candidate(False, 1.0, np.inf), candidate(False, 1.0, 50.0)]) == 1

    def test_select_lambda_returns_pair_and_control(self):
        candidates = [candidate(False, 1.0, 2.0, lam=(1.0, 2.0)), candidate(True, 3.0, 0.0, lam=(5.0, 6.0))]
        lam, control = select_lambda(candidates)
        assert lam == (5.0, 6.0)
        np.testing.assert_array_equal(control, candidates[1].control)

    def test_empty(self):
        with pytest.raises(ValueError):
            selected_index([])


class TestCandidateEvaluation:
    def test_feasible_beats_equally_cheap_infeasible(self, point_mass_env, origin_safe_set):
        stay = np.zeros((5, 2))
        drift = np.tile([0.0, 1.0], (5, 1))
        candidates = evaluate_control_candidates(np.zeros(4), np.stack([drift, stay]), [[0.0, 0.0], [0.0, 0.0]],
                                                 point_mass_env, origin_safe_set, zero_value, k_neighbors=3)
        assert not candidates[0].feasible
        assert candidates[0].violation > 0.0
        assert candidates[1].feasible
        assert candidates[1].violation == 0.0
        assert candidates[0].sampled_cost == candidates[1].sampled_cost
        assert selected_index(candidates) == 1

    def test_admissible_violation_counts(self, point_mass_env, origin_safe_set):
        x0 = np.array([21.0, 0.0, 0.0, 0.0])
        candidates = evaluate_control_candidates(x0, np.zeros((1, 3, 2)), [[2.0, 0.0]],
                                                 point_mass_env, origin_safe_set, zero_value, k_neighbors=3)
        # Parked 1 m inside the obstacle for 3 steps plus the terminal state
        assert not candidates[0].feasible
        assert candidates[0].sampled_cost == pytest.approx(3.0 + 2.0 * 3.0)
        assert candidates[0].violation >= 4.0

    def test_absorbed_rollout_needs_no_hull(self, short_hop_env, origin_safe_set):
        x0 = np.array([4.5, 0.0, 0.0, 0.0])
        candidates = evaluate_control_candidates(x0, np.zeros((1, 3, 2)), [[1.0, 1.0]],
                                                 short_hop_env, origin_safe_set, zero_value, k_neighbors=3)
        assert candidates[0].feasible
        assert candidates[0].sampled_cost == 0.0

    def test_one_candidate_per_pair(self, point_mass_env, origin_safe_set, rng):
        controls = rng.uniform(-0.1, 0.1, size=(32, 5, 2))
        batch = rollout_batch(np.zeros(4), controls, point_mass_env)
        lambdas = [[1.0, 1.0], [10.0, 10.0], [100.0, 100.0]]
        candidates = evaluate_candidates(np.zeros(4), batch, np.zeros(32), np.zeros(32), lambdas,
                                         point_mass_env, origin_safe_set, zero_value, temperature=1.0,
                                         k_neighbors=3)
        assert [c.lam for c in candidates] == [(1.0, 1.0), (10.0, 10.0), (100.0, 100.0)]
        for c in candidates:
            assert c.control.shape == (5, 2)
            assert c.nominal.shape == (6, 4)

    def test_no_pairs(self, point_mass_env, origin_safe_set, rng):
        batch = rollout_batch(np.zeros(4), np.zeros((4, 2, 2)), point_mass_env)
        with pytest.raises(ValueError):
            evaluate_candidates(np.zeros(4), batch, np.zeros(4), np.zeros(4), np.zeros((0, 2)),
                                point_mass_env, origin_safe_set, zero_value, temperature=1.0)


class TestResamplePolicy:
    def controller(self, env, resample):
        config = small_config()
        return build_controller(env, replace(config, penalty=replace(config.penalty, resample=resample)))

    def test_run_policy_is_constant(self, short_hop_env):
        controller = self.controller(short_hop_env, 'run')
        np.testing.assert_array_equal(penalty_lambdas(controller, 0, 1, 0), penalty_lambdas(controller, 0, 4, 9))

    def test_iteration_policy(self, short_hop_env):
        controller = self.controller(short_hop_env, 'iteration')
        np.testing.assert_array_equal(penalty_lambdas(controller, 0, 2, 0), penalty_lambdas(controller, 0, 2, 7))
        assert not np.array_equal(penalty_lambdas(controller, 0, 2, 0), penalty_lambdas(controller, 0, 3, 0))

    def test_step_policy(self, short_hop_env):
        controller = self.controller(short_hop_env, 'step')
        assert not np.array_equal(penalty_lambdas(controller, 0, 2, 0), penalty_lambdas(controller, 0, 2, 1))
        np.testing.assert_array_equal(penalty_lambdas(controller, 5, 2, 1), penalty_lambdas(controller, 5, 2, 1))

    def test_pairs_inside_box(self, short_hop_env):
        controller = self.controller(short_hop_env, 'step')
        pairs = penalty_lambdas(controller, 1, 1, 1)
        assert pairs.shape == (2, 2)
        assert np.all((pairs >= 0.0) & (pairs <= 1000.0))
