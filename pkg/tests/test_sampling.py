"""
Tests for control sampling, warm starts and the rollout engine.
"""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from solver.sampling import (SamplerConfig, rollout_batch, sample_penalty_grid,
                             sample_truncated_normal_sequences, warm_start_shift)
from systems.environments import PointMassEnvironment
from utils.rng import CONTROLS, PENALTY, stream, truncated_normal


def sampler(n_samples=256, horizon=10, variance=(0.25, 0.25)) -> SamplerConfig:
    return SamplerConfig(variance=np.asarray(variance), u_lo=np.full(2, -1.0), u_hi=np.full(2, 1.0),
                         n_samples=n_samples, horizon=horizon)


class ThrottleLimitedEnvironment(PointMassEnvironment):
    """Point mass whose dynamics blow up for large positive x-acceleration."""

    def step(self, x, u):
        x_next = super().step(x, u)
        return np.where(np.asarray(u)[..., :1] > 0.5, np.inf, x_next)


class TestTruncatedNormal:
    @given(st.integers(min_value=0, max_value=2 ** 31), st.floats(min_value=-3.0, max_value=3.0),
           st.floats(min_value=0.01, max_value=5.0))
    def test_within_bounds(self, seed, mean, std):
        draws = truncated_normal(np.random.default_rng(seed), mean, std, -1.0, 1.0, size=200)
        assert np.all(draws >= -1.0)
        assert np.all(draws <= 1.0)

    def test_zero_std_returns_clamped_mean(self, rng):
        draws = truncated_normal(rng, np.array([0.3, 2.0]), 0.0, -1.0, 1.0, size=(4, 2))
        np.testing.assert_array_equal(draws, np.tile([0.3, 1.0], (4, 1)))

    def test_mean_far_outside_window(self, rng):
        draws = truncated_normal(rng, 50.0, 1.0, -1.0, 1.0, size=1000)
        assert np.all(np.isfinite(draws))
        assert draws.min() > 0.9

    def test_moments_with_wide_bounds(self, rng):
        draws = truncated_normal(rng, 0.2, 0.1, -10.0, 10.0, size=20000)
        assert draws.mean() == pytest.approx(0.2, abs=5e-3)
        assert draws.std() == pytest.approx(0.1, abs=5e-3)

    @pytest.mark.parametrize('mean, std', [(0.0, 10.0), (0.5, 0.4), (-0.8, 1.5)])
    def test_matches_scipy_truncnorm(self, mean, std):
        draws = truncated_normal(np.random.default_rng(11), mean, std, -1.0, 1.0, size=10000)
        reference = stats.truncnorm((-1.0 - mean) / std, (1.0 - mean) / std, loc=mean, scale=std)
        assert stats.kstest(draws, reference.cdf).pvalue > 1e-3


class TestStreams:
    def test_same_key_same_draws(self):
        np.testing.assert_array_equal(stream(7, CONTROLS, 3, 4).random(5), stream(7, CONTROLS, 3, 4).random(5))

    def test_keys_are_independent(self):
        a = stream(7, CONTROLS, 3, 4).random(5)
        assert not np.array_equal(a, stream(7, PENALTY, 3, 4).random(5))
        assert not np.array_equal(a, stream(7, CONTROLS, 3, 5).random(5))
        assert not np.array_equal(a, stream(8, CONTROLS, 3, 4).random(5))


class TestSampling:
    def test_shape_and_bounds(self, rng):
        config = sampler(variance=(4.0, 4.0))
        controls = sample_truncated_normal_sequences(np.full((10, 2), 0.8), config, rng)
        assert controls.shape == (256, 10, 2)
        assert np.all(np.abs(controls) <= 1.0)

    def test_mean_shape_checked(self, rng):
        with pytest.raises(ValueError):
            sample_truncated_normal_sequences(np.zeros((9, 2)), sampler(), rng)

    def test_std_override(self, rng):
        controls = sample_truncated_normal_sequences(np.zeros((10, 2)), sampler(), rng, std=np.zeros(2))
        np.testing.assert_array_equal(controls, 0.0)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            sampler(variance=(0.0, 0.25))
        with pytest.raises(ValueError):
            sampler(n_samples=0)
        with pytest.raises(ValueError):
            SamplerConfig(variance=np.ones(2), u_lo=np.ones(2), u_hi=np.zeros(2))

    def test_warm_start_shift(self):
        previous = np.arange(8.0).reshape(4, 2)
        np.testing.assert_array_equal(warm_start_shift(previous), [[2, 3], [4, 5], [6, 7], [6, 7]])
        assert warm_start_shift(np.zeros((0, 2))).shape == (0, 2)


class TestRollout:
    def test_matches_sequential_steps(self, point_mass_env, rng):
        controls = sample_truncated_normal_sequences(np.zeros((6, 2)), sampler(n_samples=5, horizon=6), rng)
        x0 = np.array([1.0, -2.0, 0.5, 0.0])
        batch = rollout_batch(x0, controls, point_mass_env)
        for i in range(5):
            x = x0
            for k in range(6):
                x = point_mass_env.step(x, controls[i, k])
                np.testing.assert_allclose(batch.states[i, k + 1], x)
        np.testing.assert_array_equal(batch.h_sums, 6.0)
        np.testing.assert_array_equal(batch.d_sums, 0.0)
        assert not batch.absorbed.any()
        assert not batch.diverged.any()

    def test_constraint_distance_summed(self, point_mass_env):
        x0 = np.array([25.0, 0.0, 0.0, 0.0])
        batch = rollout_batch(x0, np.zeros((1, 3, 2)), point_mass_env)
        assert batch.d_sums[0] == pytest.approx(15.0)
        assert batch.d_terminal[0] == pytest.approx(5.0)

    def test_absorption_stops_accumulation(self, short_hop_env):
        x0 = np.array([3.5, 0.0, 0.4, 0.0])
        batch = rollout_batch(x0, np.zeros((2, 20, 2)), short_hop_env)
        np.testing.assert_array_equal(batch.h_sums, 13.0)
        assert batch.absorbed.all()
        np.testing.assert_array_equal(batch.d_terminal, 0.0)

    def test_start_in_target(self, short_hop_env):
        batch = rollout_batch(np.array([5.0, 0.0, 0.0, 0.0]), np.zeros((3, 4, 2)), short_hop_env)
        np.testing.assert_array_equal(batch.h_sums, 0.0)
        assert batch.absorbed.all()

    def test_diverged_samples_get_infinite_cost(self):
        env = ThrottleLimitedEnvironment()
        controls = np.zeros((3, 4, 2))
        controls[1, 2, 0] = 0.9
        batch = rollout_batch(np.zeros(4), controls, env)
        assert batch.diverged.tolist() == [False, True, False]
        assert batch.h_sums[1] == np.inf
        assert np.all(np.isfinite(batch.h_sums[[0, 2]]))
        assert np.all(np.isfinite(batch.states))


class TestPenaltyGrid:
    def test_shape_and_box(self, rng):
        grid = sample_penalty_grid(50, 10.0, 2.0, rng)
        assert grid.shape == (50, 2)
        assert np.all((grid[:, 0] >= 0) & (grid[:, 0] <= 10.0))
        assert np.all((grid[:, 1] >= 0) & (grid[:, 1] <= 2.0))

    def test_invalid_arguments(self, rng):
        with pytest.raises(ValueError):
            sample_penalty_grid(0, 1.0, 1.0, rng)
        with pytest.raises(ValueError):
            sample_penalty_grid(3, 0.0, 1.0, rng)
