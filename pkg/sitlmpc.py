"""
Command-line entry point.

    sitlmpc run <config> [--seed N ...] [--iterations L] [--out DIR] [--variant V] [--workers W]
    sitlmpc ablate <config> --variants ap-mppi,fixed-high-mppi,...
    sitlmpc resume <checkpoint> [--iterations L]
    sitlmpc validate <config>
"""
import sys

import click

from core.errors import ConfigError, SitLmpcError
from learning.experiment import resume_experiment, run_ablation, run_experiment
from utils.experiment_config import load_config, validate_config, variant_configs
from utils.log import get_logger

logger = get_logger('cli')

EXIT_INVALID_CONFIG = 2
EXIT_RUN_FAILED = 1

DEFAULT_VARIANTS = 'ap-mppi,fixed-high-mppi,fixed-low-mppi,ap-cem,fixed-high-cem,fixed-low-cem'


def _overrides(seeds, iterations, out, variant, workers) -> dict:
    return {
        'seeds': list(seeds) if seeds else None,
        'iterations': iterations,
        'output_dir': out,
        'variant': variant,
        'workers': workers,
    }


def _report_config_error(error: ConfigError) -> None:
    click.echo("[ERROR] invalid config:", err=True)
    for problem in error.problems:
        click.echo(f"  - {problem}", err=True)
    sys.exit(EXIT_INVALID_CONFIG)


@click.group()
def cli():
    """Safe information-theoretic learning MPC experiments."""


@cli.command()
@click.argument('config_path', type=click.Path(dir_okay=False))
@click.option('--seed', 'seeds', type=int, multiple=True, help='Seed to run (repeatable); replaces the config list.')
@click.option('--iterations', type=click.IntRange(min=0), default=None, help='Learning iterations per seed.')
@click.option('--out', type=click.Path(file_okay=False), default=None, help='Output root directory.')
@click.option('--variant', default=None, help='Ablation variant, e.g. fixed-high-mppi.')
@click.option('--workers', type=click.IntRange(min=1), default=None, help='Seeds run in parallel.')
def run(config_path, seeds, iterations, out, variant, workers):
    """Run every seed of an experiment config."""
    try:
        config = load_config(config_path, _overrides(seeds, iterations, out, variant, workers))
    except ConfigError as e:
        _report_config_error(e)
    try:
        summary = run_experiment(config)
    except SitLmpcError as e:
        logger.error(f"run failed: {e}")
        sys.exit(EXIT_RUN_FAILED)
    click.echo(f"{summary['experiment']}: final mean cost {summary['final_mean_cost']:.4g} "
               f"(demonstration {summary['bootstrap_mean_cost']:.4g})")


@cli.command()
@click.argument('config_path', type=click.Path(dir_okay=False))
@click.option('--variants', default=DEFAULT_VARIANTS, show_default=True,
              help='Comma-separated <ap|fixed-high|fixed-low>-<mppi|cem> names.')
@click.option('--seed', 'seeds', type=int, multiple=True)
@click.option('--iterations', type=click.IntRange(min=0), default=None)
@click.option('--out', type=click.Path(file_okay=False), default=None)
@click.option('--workers', type=click.IntRange(min=1), default=None)
def ablate(config_path, variants, seeds, iterations, out, workers):
    """Run several variants of one config on shared seeds and compare them."""
    names = [v.strip() for v in variants.split(',') if v.strip()]
    try:
        configs = variant_configs(config_path, names, _overrides(seeds, iterations, out, None, workers))
    except ConfigError as e:
        _report_config_error(e)
    try:
        summaries = run_ablation(configs)
    except SitLmpcError as e:
        logger.error(f"ablation failed: {e}")
        sys.exit(EXIT_RUN_FAILED)
    for summary in summaries:
        click.echo(f"{summary['experiment']}: final mean cost {summary['final_mean_cost']:.4g}, "
                   f"violation episodes {summary['violation_episodes']}")


@cli.command()
@click.argument('checkpoint_path', type=click.Path(file_okay=False))
@click.option('--iterations', type=click.IntRange(min=0), default=None,
              help='New total iteration count (defaults to the original).')
def resume(checkpoint_path, iterations):
    """Continue a seed from its checkpoint directory."""
    try:
        summary = resume_experiment(checkpoint_path, iterations)
    except SitLmpcError as e:
        logger.error(f"resume failed: {e}")
        sys.exit(EXIT_RUN_FAILED)
    click.echo(f"{summary['experiment']}: final mean cost {summary['final_mean_cost']:.4g}")


@cli.command()
@click.argument('config_path', type=click.Path(dir_okay=False))
def validate(config_path):
    """Check a config file and list every problem found."""
    is_valid, problems = validate_config(config_path)
    if not is_valid:
        _report_config_error(ConfigError(problems))
    click.echo(f"{config_path}: OK")


if __name__ == '__main__':
    cli()
