#!/usr/bin/env python
"""
Solver-step throughput benchmark

Times one adaptive-penalty controller step on the point mass from the initial
state, with the safe set and an untrained value model built from the scripted
demonstration.

Usage:
    python scripts/benchmark_solver.py [--samples 1024] [--horizon 30] [--pairs 8] [--repeats 20]
"""

import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from core.safe_set import build_dataset
from learning.bootstrap import demonstration, demonstration_policy, initial_safe_set
from learning.loop import build_controller
from utils.experiment_config import ExperimentConfig, SamplerSettings
from utils.files import atomic_write_text
from utils.log import get_logger
from utils.rng import CONTROLS, LATENT, PENALTY, TRAINING, stream
from systems.environments import PointMassEnvironment
from valuefn import initial_model, value_estimate

logger = get_logger('benchmark')


@click.command()
@click.option('--samples', default=1024, show_default=True)
@click.option('--horizon', default=30, show_default=True)
@click.option('--pairs', default=8, show_default=True)
@click.option('--repeats', default=20, show_default=True)
@click.option('--out', type=click.Path(dir_okay=False), default='runs/benchmark_solver.json', show_default=True)
def main(samples, horizon, pairs, repeats, out):
    """Median wall time of one controller step."""
    config = ExperimentConfig(name='benchmark', sampler=SamplerSettings(n_samples=samples, horizon=horizon))
    config = replace(config, penalty=replace(config.penalty, n_pairs=pairs))
    env = PointMassEnvironment()
    record = demonstration(env, demonstration_policy(env))
    safe_set = initial_safe_set(env, record)
    model = initial_model(build_dataset(safe_set), config.value_function, stream(0, TRAINING, 0))
    controller = build_controller(env, config)
    lambdas = controller.penalty_pairs(stream(0, PENALTY, 0))

    def value_fn(features):
        return value_estimate(features, model, config.value_function.latent_samples, stream(0, LATENT, 0))

    # Warm-up
    controller.step(env.initial_state, safe_set, value_fn, lambdas, stream(0, CONTROLS, 0))

    timings = []
    for i in range(repeats):
        controller.reset()
        start = time.perf_counter()
        controller.step(env.initial_state, safe_set, value_fn, lambdas, stream(0, CONTROLS, i + 1))
        timings.append(time.perf_counter() - start)

    result = {
        'samples': samples,
        'horizon': horizon,
        'pairs': pairs,
        'repeats': repeats,
        'safe_set_size': len(safe_set),
        'median_ms': 1000.0 * float(np.median(timings)),
        'min_ms': 1000.0 * float(np.min(timings)),
        'max_ms': 1000.0 * float(np.max(timings)),
    }
    logger.info(f"[PERFORMANCE] Controller step: median {result['median_ms']:.1f} ms "
                f"(N={samples}, T={horizon}, P={pairs}, {repeats} repeats)")
    atomic_write_text(out, json.dumps(result, indent=2))
    click.echo(json.dumps(result, indent=2))
    return 0


if __name__ == "__main__":
    main()
