"""
Experiment harness: run every seed of a config, write per-seed and
aggregated artifacts, and compare ablation variants.

Layout under the output root:
    <label>/<seed>/metrics.csv, records.jsonl, checkpoint/
    <label>/metrics.csv, timing.csv, summary.json, cost_vs_iteration.svg, trajectories.svg
    <name>-ablation/comparison.csv, comparison.svg

metrics.csv holds no wall-clock values, so identical runs write identical files.
"""
import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from core.types import IterationRecord
from learning.checkpoint import RECORDS_FILE, checkpoint, records_from_jsonl, records_to_jsonl, resume
from learning.loop import RunState, run_iterations, start_run
from systems.environments import Environment, make_environment
from utils.experiment_config import ExperimentConfig, with_iterations
from utils.files import atomic_write_text
from utils.log import get_logger
from utils.plotting import plot_comparison, plot_cost_curves, plot_trajectories, select_trajectories

logger = get_logger('experiment')

METRIC_COLUMNS = ['seed', 'iteration', 'iteration_cost', 'cost_seconds', 'feasible', 'violations',
                  'termination', 'mean_lambda_x', 'mean_lambda_cs']
TIMING_COLUMNS = ['seed', 'iteration', 'wall_time']
COMPARISON_COLUMNS = ['variant', 'seeds', 'bootstrap_mean_cost', 'final_mean_cost', 'final_mean_seconds',
                      'improvement', 'infeasible_rate', 'violation_episodes']
CHECKPOINT_DIR = 'checkpoint'


def experiment_dir(config: ExperimentConfig) -> Path:
    return Path(config.output_dir) / config.label


def seed_dir(config: ExperimentConfig, seed: int) -> Path:
    return experiment_dir(config) / str(seed)


# ============ METRICS ============

def metric_rows(seed: int, records: Sequence[IterationRecord], dt: float) -> List[Dict]:
    """One row per learning iteration, in iteration order."""
    rows = []
    for record in records:
        lam_x, lam_cs = record.mean_lambda
        rows.append({
            'seed': seed,
            'iteration': record.iteration,
            'iteration_cost': record.iteration_cost,
            'cost_seconds': record.iteration_cost * dt,
            'feasible': int(record.feasible),
            'violations': record.violation_count,
            'termination': record.termination,
            'mean_lambda_x': lam_x,
            'mean_lambda_cs': lam_cs,
        })
    return rows


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_csv(rows: Sequence[Dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def read_metrics(path) -> List[Dict]:
    """Parse a metrics.csv back into typed rows."""
    rows = []
    with open(path, newline='') as f:
        for raw in csv.DictReader(f):
            rows.append({
                'seed': int(raw['seed']),
                'iteration': int(raw['iteration']),
                'iteration_cost': float(raw['iteration_cost']),
                'cost_seconds': float(raw['cost_seconds']),
                'feasible': bool(int(raw['feasible'])),
                'violations': int(raw['violations']),
                'termination': raw['termination'],
                'mean_lambda_x': float(raw['mean_lambda_x']),
                'mean_lambda_cs': float(raw['mean_lambda_cs']),
            })
    return rows


# ============ PER SEED ============

def write_seed_artifacts(run: RunState, env: Environment, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / 'metrics.csv', format_csv(metric_rows(run.seed, run.records, env.dt), METRIC_COLUMNS))
    atomic_write_text(out / RECORDS_FILE, records_to_jsonl([run.bootstrap] + run.records))


def run_seed(config: ExperimentConfig, seed: int, resume_from: Optional[str] = None) -> int:
    """
    Run (or continue) one seed, checkpointing after every iteration.

    Args:
        config: Experiment config
        seed: Master seed of this run
        resume_from: Checkpoint directory to continue from instead of bootstrapping

    Returns:
        The seed, once its artifacts are written
    """
    env = make_environment(config.environment)
    out = seed_dir(config, seed)
    if resume_from is not None:
        run = resume(resume_from)
        run.config = config
    else:
        run = start_run(config, seed, env)
    checkpoint(run, out / CHECKPOINT_DIR)
    write_seed_artifacts(run, env, out)

    def on_iteration(state: RunState) -> None:
        checkpoint(state, out / CHECKPOINT_DIR)
        write_seed_artifacts(state, env, out)

    run_iterations(run, env, on_iteration)
    return seed


def load_seed_records(config: ExperimentConfig, seed: int) -> List[IterationRecord]:
    """Demonstration followed by the learning iterations of one seed."""
    return records_from_jsonl((seed_dir(config, seed) / RECORDS_FILE).read_text())


# ============ AGGREGATION ============

def summarize(config: ExperimentConfig, records_by_seed: Dict[int, List[IterationRecord]], dt: float) -> Dict:
    """
    Per-seed cost curves (index 0 is the demonstration), their mean and the
    headline statistics of the final iteration.

    The curves and their mean include infeasible episodes. The final mean cost
    and the improvement over the demonstration use only the seeds whose final
    episode was feasible (NaN when none was); ``infeasible_rate`` reports the
    rest.
    """
    curves = {seed: [r.iteration_cost for r in records] for seed, records in sorted(records_by_seed.items())}
    length = min((len(c) for c in curves.values()), default=0)
    mean_curve = np.mean([c[:length] for c in curves.values()], axis=0).tolist() if curves and length else []
    learning = [r for records in records_by_seed.values() for r in records[1:]]
    bootstrap_mean = float(np.mean([c[0] for c in curves.values()])) if curves else float('nan')
    final_costs = [records[length - 1].iteration_cost for _, records in sorted(records_by_seed.items())
                   if length and records[length - 1].feasible]
    final_mean = float(np.mean(final_costs)) if final_costs else float('nan')
    return {
        'experiment': config.label,
        'environment': config.environment.kind,
        'variant': config.variant,
        'seeds': sorted(curves),
        'iterations': config.iterations,
        'dt': dt,
        'cost_unit': 'steps',
        'curves': {str(seed): c for seed, c in curves.items()},
        'feasible': {str(seed): [r.feasible for r in records] for seed, records in sorted(records_by_seed.items())},
        'mean_curve': mean_curve,
        'bootstrap_mean_cost': bootstrap_mean,
        'final_mean_cost': final_mean,
        'final_mean_seconds': final_mean * dt,
        'final_feasible_seeds': len(final_costs),
        'improvement': 1.0 - final_mean / bootstrap_mean if final_costs and bootstrap_mean > 0 else float('nan'),
        'infeasible_rate': (sum(1 for r in learning if not r.feasible) / len(learning)) if learning else 0.0,
        'violation_episodes': sum(1 for r in learning if r.violation_count > 0),
    }


def aggregate_experiment(config: ExperimentConfig, seeds: Sequence[int], env: Optional[Environment] = None) -> Dict:
    """Write the experiment-level tables, summary and figures from the seed directories."""
    env = env or make_environment(config.environment)
    out = experiment_dir(config)
    out.mkdir(parents=True, exist_ok=True)
    records_by_seed = {seed: load_seed_records(config, seed) for seed in sorted(seeds)}

    rows = [row for seed, records in records_by_seed.items() for row in metric_rows(seed, records[1:], env.dt)]
    atomic_write_text(out / 'metrics.csv', format_csv(rows, METRIC_COLUMNS))
    timing = [{'seed': seed, 'iteration': r.iteration, 'wall_time': r.wall_time}
              for seed, records in records_by_seed.items() for r in records]
    atomic_write_text(out / 'timing.csv', format_csv(timing, TIMING_COLUMNS))

    summary = summarize(config, records_by_seed, env.dt)
    atomic_write_text(out / 'summary.json', json.dumps(summary, indent=2))

    seconds = {seed: [env.cost_seconds(c) for c in curve] for seed, curve in
               ((s, [r.iteration_cost for r in records]) for s, records in records_by_seed.items())}
    plot_cost_curves(seconds, out / 'cost_vs_iteration.svg', ylabel='iteration cost [s]', title=config.label)
    first_seed = min(records_by_seed) if records_by_seed else None
    if first_seed is not None:
        plot_trajectories(select_trajectories(records_by_seed[first_seed]), out / 'trajectories.svg',
                          env=env, title=f"{config.label}, seed {first_seed}")
    logger.info(f"{config.label}: final mean cost {summary['final_mean_cost']:.4g} "
                f"(demonstration {summary['bootstrap_mean_cost']:.4g}), "
                f"infeasible rate {summary['infeasible_rate']:.2f}")
    return summary


def run_experiment(config: ExperimentConfig, workers: Optional[int] = None) -> Dict:
    """
    Run every seed of a config and aggregate the results.

    Seeds run in separate processes when more than one worker is allowed;
    each writes only its own directory.
    """
    workers = workers or config.workers
    seeds = list(config.seeds)
    logger.info(f"Running {config.label}: {len(seeds)} seed(s) x {config.iterations} iteration(s), "
                f"{workers} worker(s)")
    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
            list(pool.map(run_seed, [config] * len(seeds), seeds))
    else:
        for seed in seeds:
            run_seed(config, seed)
    return aggregate_experiment(config, seeds)


def resume_experiment(checkpoint_path, iterations: Optional[int] = None) -> Dict:
    """Continue the seed stored at ``checkpoint_path`` and re-aggregate its experiment."""
    state = resume(checkpoint_path)
    config = state.config if iterations is None else with_iterations(state.config, iterations)
    run_seed(config, state.seed, resume_from=str(checkpoint_path))
    present = [s for s in config.seeds if (seed_dir(config, s) / RECORDS_FILE).is_file()]
    return aggregate_experiment(config, present)


def run_ablation(configs: Sequence[ExperimentConfig], workers: Optional[int] = None) -> List[Dict]:
    """
    Run each variant config and write a joint comparison.

    Returns:
        One summary per variant, in the given order
    """
    summaries = [run_experiment(config, workers) for config in configs]
    if not configs:
        return summaries
    out = Path(configs[0].output_dir) / f"{configs[0].name}-ablation"
    out.mkdir(parents=True, exist_ok=True)
    rows = [{
        'variant': s['variant'] or s['experiment'],
        'seeds': len(s['seeds']),
        'bootstrap_mean_cost': s['bootstrap_mean_cost'],
        'final_mean_cost': s['final_mean_cost'],
        'final_mean_seconds': s['final_mean_seconds'],
        'improvement': s['improvement'],
        'infeasible_rate': s['infeasible_rate'],
        'violation_episodes': s['violation_episodes'],
    } for s in summaries]
    atomic_write_text(out / 'comparison.csv', format_csv(rows, COMPARISON_COLUMNS))
    plot_comparison({row['variant']: [c * s['dt'] for c in s['mean_curve']] for row, s in zip(rows, summaries)},
                    out / 'comparison.svg', ylabel='mean iteration cost [s]')
    return summaries
