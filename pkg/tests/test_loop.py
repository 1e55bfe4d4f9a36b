"""
Tests for the learning loop: episodes, iteration bookkeeping and checkpoints.
"""
import json
from dataclasses import replace

import numpy as np
import pytest

import learning.loop as loop
from core.errors import CheckpointError, TrainingError
from learning.checkpoint import RECORDS_FILE, RUN_FILE, checkpoint, resume
from learning.loop import TERMINATIONS, advance_iteration, run_episode, run_iterations, start_run
from systems.environments import PointMassEnvironment, make_environment
from tests.conftest import CONFIG_DIR, small_config
from utils.experiment_config import load_config


@pytest.fixture(scope='module')
def fresh_run():
    return start_run(small_config(), seed=0)


@pytest.fixture
def violating_env():
    """Starts half a meter inside the obstacle."""
    return PointMassEnvironment(obstacle_center=(0.5, 0.0), obstacle_radius=1.0, target=(5.0, 0.0, 0.0, 0.0))


@pytest.fixture
def resting_env():
    """Starts inside its own target."""
    return PointMassEnvironment(obstacle_center=(100.0, 100.0), obstacle_radius=1.0, target=(0.0, 0.0, 0.0, 0.0))


class TestStartRun:
    def test_bootstrap(self, fresh_run):
        assert fresh_run.iteration == 0
        assert fresh_run.records == []
        assert fresh_run.bootstrap.iteration == 0
        assert fresh_run.bootstrap.feasible
        assert len(fresh_run.safe_set) == len(fresh_run.bootstrap.trajectory.states)
        assert fresh_run.safe_set.feasible_iterations == {0}

    def test_step_cap_derived_from_bootstrap(self, fresh_run):
        expected = max(int(round(4.0 * len(fresh_run.bootstrap.trajectory))), 11)
        assert fresh_run.step_cap == expected

    def test_explicit_step_cap(self):
        config = small_config()
        run = start_run(replace(config, loop=replace(config.loop, step_cap=25)), seed=0)
        assert run.step_cap == 25


class TestEpisode:
    def test_record_invariants(self, fresh_run, short_hop_env):
        record = run_episode(fresh_run, short_hop_env)
        assert record.iteration == 1
        assert record.termination in TERMINATIONS
        assert len(record.trajectory) <= fresh_run.step_cap
        assert len(record.steps) == len(record.trajectory)
        # Minimum-time cost: every state before the last lies outside the target
        assert record.iteration_cost == float(len(record.trajectory))
        if record.feasible:
            assert record.violation_count == 0
            assert short_hop_env.in_target(record.trajectory.states[-1])
        for step in record.steps:
            assert 0.0 <= step.lambda_x <= 1000.0
            assert 0.0 <= step.lambda_cs <= 1000.0

    def test_deterministic(self, fresh_run, short_hop_env):
        first = run_episode(fresh_run, short_hop_env)
        second = run_episode(fresh_run, short_hop_env)
        np.testing.assert_array_equal(first.trajectory.states, second.trajectory.states)
        np.testing.assert_array_equal(first.trajectory.inputs, second.trajectory.inputs)
        assert first.termination == second.termination

    def test_start_in_target(self, fresh_run, resting_env):
        record = run_episode(fresh_run, resting_env)
        assert record.termination == 'target'
        assert record.feasible
        assert record.iteration_cost == 0.0
        assert len(record.trajectory) == 0

    def test_start_in_obstacle(self, fresh_run, violating_env):
        record = run_episode(fresh_run, violating_env)
        assert record.termination == 'violation'
        assert not record.feasible
        assert record.violation_count == 1
        assert len(record.trajectory) == 0


class TestAdvanceIteration:
    def test_infeasible_leaves_safe_set_and_model(self, fresh_run, violating_env):
        record = run_episode(fresh_run, violating_env)
        run = advance_iteration(fresh_run, record, violating_env)
        assert run.iteration == 1
        assert run.records == [record]
        assert run.safe_set is fresh_run.safe_set
        assert run.model is fresh_run.model

    def test_feasible_grows_safe_set_and_retrains(self, fresh_run, resting_env):
        record = run_episode(fresh_run, resting_env)
        run = advance_iteration(fresh_run, record, resting_env)
        assert run.iteration == 1
        assert len(run.safe_set) == len(fresh_run.safe_set) + 1
        assert run.safe_set.feasible_iterations == {0, 1}
        assert run.model is not fresh_run.model
        assert record.message == ''

    def test_training_failure_keeps_model(self, fresh_run, resting_env, monkeypatch):
        def failing_train(*args, **kwargs):
            raise TrainingError("loss diverged")

        monkeypatch.setattr(loop, 'train', failing_train)
        record = run_episode(fresh_run, resting_env)
        run = advance_iteration(fresh_run, record, resting_env)
        assert run.model is fresh_run.model
        assert len(run.safe_set) == len(fresh_run.safe_set) + 1
        assert 'loss diverged' in record.message

    def test_original_state_unchanged(self, fresh_run, resting_env):
        size = len(fresh_run.safe_set)
        advance_iteration(fresh_run, run_episode(fresh_run, resting_env), resting_env)
        assert fresh_run.iteration == 0
        assert fresh_run.records == []
        assert len(fresh_run.safe_set) == size


class TestRunIterations:
    def test_runs_to_configured_count(self, fresh_run, short_hop_env):
        seen = []
        run = run_iterations(fresh_run, short_hop_env, on_iteration=lambda r: seen.append(r.iteration))
        assert seen == [1, 2]
        assert run.done
        assert [r.iteration for r in run.records] == [1, 2]

    def test_nothing_left_to_run(self, fresh_run, short_hop_env):
        finished = replace(fresh_run, config=replace(fresh_run.config, iterations=0))
        assert run_iterations(finished, short_hop_env) is finished


class TestCheckpoint:
    def test_resume_continues_identically(self, fresh_run, short_hop_env, tmp_path):
        run = advance_iteration(fresh_run, run_episode(fresh_run, short_hop_env), short_hop_env)
        checkpoint(run, tmp_path)
        direct = run_episode(run, short_hop_env)

        resumed = resume(tmp_path)
        assert resumed.seed == run.seed
        assert resumed.iteration == 1
        assert resumed.step_cap == run.step_cap
        assert len(resumed.safe_set) == len(run.safe_set)
        np.testing.assert_array_equal(resumed.model.params, run.model.params)
        continued = run_episode(resumed, short_hop_env)
        assert continued.iteration == direct.iteration == 2
        np.testing.assert_array_equal(continued.trajectory.states, direct.trajectory.states)
        assert continued.termination == direct.termination

    def test_records_file_starts_with_demonstration(self, fresh_run, tmp_path):
        checkpoint(fresh_run, tmp_path)
        lines = (tmp_path / RECORDS_FILE).read_text().splitlines()
        assert len(lines) == 1
        assert json.loads(lines[0])['iteration'] == 0

    def test_missing(self, tmp_path):
        with pytest.raises(CheckpointError):
            resume(tmp_path / 'nowhere')

    def test_version_mismatch(self, fresh_run, tmp_path):
        checkpoint(fresh_run, tmp_path)
        header = json.loads((tmp_path / RUN_FILE).read_text())
        header['version'] = 99
        (tmp_path / RUN_FILE).write_text(json.dumps(header))
        with pytest.raises(CheckpointError, match="version"):
            resume(tmp_path)

    def test_record_count_must_match_iteration(self, fresh_run, tmp_path):
        checkpoint(fresh_run, tmp_path)
        header = json.loads((tmp_path / RUN_FILE).read_text())
        header['iteration'] = 3
        (tmp_path / RUN_FILE).write_text(json.dumps(header))
        with pytest.raises(CheckpointError):
            resume(tmp_path)

    def test_invalid_config(self, fresh_run, tmp_path):
        checkpoint(fresh_run, tmp_path)
        header = json.loads((tmp_path / RUN_FILE).read_text())
        header['config']['mppi']['temperature'] = -1.0
        (tmp_path / RUN_FILE).write_text(json.dumps(header))
        with pytest.raises(CheckpointError, match="config"):
            resume(tmp_path)

    def test_corrupt_records(self, fresh_run, tmp_path):
        checkpoint(fresh_run, tmp_path)
        (tmp_path / RECORDS_FILE).write_text("{not json\n")
        with pytest.raises(CheckpointError):
            resume(tmp_path)


class TestShippedConfigs:
    def test_point_mass_first_iteration_reaches_target(self):
        config = replace(load_config(CONFIG_DIR / 'point_mass.toml'), seeds=(0,), iterations=1)
        env = make_environment(config.environment)
        run = start_run(config, seed=0, env=env)
        record = run_episode(run, env)
        assert record.termination == 'target'
        assert record.feasible
        assert record.violation_count == 0
        assert env.in_target(record.trajectory.states[-1])

    def test_noise_free_racing_lap(self):
        config = load_config(CONFIG_DIR / 'racing.toml')
        config = replace(config, seeds=(0,), iterations=1,
                         environment=replace(config.environment, observation_std=(0.0,) * 7, actuation_std=(0.0, 0.0)),
                         sampler=replace(config.sampler, n_samples=64, horizon=15),
                         penalty=replace(config.penalty, n_pairs=2),
                         value_function=replace(config.value_function, epochs=10))
        env = make_environment(config.environment)
        run = start_run(config, seed=0, env=env)
        record = run_episode(run, env)
        assert record.termination == 'target'
        assert record.feasible
        assert record.trajectory.states[-1, 7] >= env.track.length
