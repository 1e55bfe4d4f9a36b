"""
Shared fixtures and hypothesis profiles.

Select a profile with HYPOTHESIS_PROFILE=thorough for the long randomized runs.
"""
import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent.parent))

from core.types import IterationRecord, Trajectory
from learning.bootstrap import demonstration, demonstration_policy, initial_safe_set
from solver.penalty import PenaltySettings
from systems.environments import PointMassEnvironment
from utils.experiment_config import (EnvironmentSettings, ExperimentConfig, SafeSetSettings,
                                     SamplerSettings)
from valuefn import TrainConfig

settings.register_profile('default', max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile('thorough', max_examples=1000, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get('HYPOTHESIS_PROFILE', 'default'))

REPO_ROOT = Path(__file__).parent.parent
CONFIG_DIR = REPO_ROOT / 'configs'


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def point_mass_env():
    return PointMassEnvironment()


def short_hop_settings() -> EnvironmentSettings:
    """Point mass 5 m from its target with the obstacle far out of the way."""
    return EnvironmentSettings(kind='point_mass', obstacle_center=(100.0, 100.0), obstacle_radius=1.0,
                               target=(5.0, 0.0, 0.0, 0.0))


def small_config(**overrides) -> ExperimentConfig:
    values = dict(
        name='unit',
        seeds=(0,),
        iterations=2,
        environment=short_hop_settings(),
        sampler=SamplerSettings(variance=(0.25, 0.25), n_samples=64, horizon=10),
        penalty=PenaltySettings(n_pairs=2),
        safe_set=SafeSetSettings(k_neighbors=8, hull_max_iter=20),
        value_function=TrainConfig(epochs=3, learning_rate=1e-3, batch_size=64, latent_samples=4,
                                   n_layers=2, hidden=8, n_bins=4),
    )
    values.update(overrides)
    return ExperimentConfig(**values)


@pytest.fixture
def short_hop_env():
    s = short_hop_settings()
    return PointMassEnvironment(obstacle_center=s.obstacle_center, obstacle_radius=s.obstacle_radius,
                                target=s.target)


def straight_record(env, n_steps: int, iteration: int = 0, accel: float = 0.0) -> IterationRecord:
    """Constant-input point-mass record; marked feasible, the caller picks a target that fits."""
    x = env.initial_state.copy()
    states, inputs = [x], []
    for _ in range(n_steps):
        u = np.array([accel, 0.0])
        x = env.step(x, u)
        states.append(x)
        inputs.append(u)
    trajectory = Trajectory(np.array(states), np.array(inputs).reshape(n_steps, 2))
    return IterationRecord(iteration=iteration, trajectory=trajectory, feasible=True,
                           iteration_cost=float(n_steps), violation_count=0, wall_time=0.0)


@pytest.fixture
def demo_safe_set(short_hop_env):
    record = demonstration(short_hop_env, demonstration_policy(short_hop_env))
    return initial_safe_set(short_hop_env, record)
