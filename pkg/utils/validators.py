"""
Experiment-config validation.

Every check records a problem instead of raising, so a single pass reports
everything wrong with a file.
"""
import numbers
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

ENVIRONMENT_KINDS = ('point_mass', 'racing')
OPTIMIZERS = ('mppi', 'cem')
PENALTY_MODES = ('adaptive', 'fixed_high', 'fixed_low')
RESAMPLE_POLICIES = ('run', 'iteration', 'step')

# Observation noise acts on the plant coordinates
PLANT_STATE_DIM = {'point_mass': 4, 'racing': 7}
INPUT_DIM = 2


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_number(v) -> bool:
    return isinstance(v, numbers.Real) and not isinstance(v, bool)


def _is_number_list(v) -> bool:
    return isinstance(v, list) and all(_is_number(x) for x in v)


Rule = Tuple[Callable[[Any], bool], str]

SCHEMA: Dict[str, Dict[str, Rule]] = {
    'experiment': {
        'name': (lambda v: isinstance(v, str) and v != '', "must be a non-empty string"),
        'seeds': (lambda v: isinstance(v, list) and len(v) > 0 and all(_is_int(s) and s >= 0 for s in v),
                  "must be a non-empty list of non-negative integers"),
        'iterations': (lambda v: _is_int(v) and v >= 0, "must be an integer >= 0"),
        'output_dir': (lambda v: isinstance(v, str) and v != '', "must be a non-empty string"),
        'variant': (lambda v: isinstance(v, str), "must be a string"),
        'workers': (lambda v: _is_int(v) and v >= 1, "must be an integer >= 1"),
    },
    'environment': {
        'kind': (lambda v: v in ENVIRONMENT_KINDS, f"must be one of {list(ENVIRONMENT_KINDS)}"),
        'dt': (lambda v: _is_number(v) and v > 0, "must be positive"),
        'observation_std': (lambda v: _is_number_list(v) and all(x >= 0 for x in v),
                            "must be a list of non-negative numbers"),
        'actuation_std': (lambda v: _is_number_list(v) and len(v) == INPUT_DIM and all(x >= 0 for x in v),
                          f"must be a list of {INPUT_DIM} non-negative numbers"),
        'noise_truncation': (lambda v: _is_number(v) and v > 0, "must be positive"),
        'obstacle_center': (lambda v: _is_number_list(v) and len(v) == 2, "must be a list of 2 numbers"),
        'obstacle_radius': (lambda v: _is_number(v) and v >= 0, "must be >= 0"),
        'target': (lambda v: _is_number_list(v) and len(v) == 4, "must be a list of 4 numbers"),
        'target_position_tol': (lambda v: _is_number(v) and v > 0, "must be positive"),
        'target_velocity_tol': (lambda v: _is_number(v) and v > 0, "must be positive"),
        'initial_state': (lambda v: _is_number_list(v) and len(v) == 4, "must be a list of 4 numbers"),
        'track_file': (lambda v: isinstance(v, str), "must be a path string"),
        'track_closed': (lambda v: isinstance(v, bool), "must be true or false"),
        'vehicle_file': (lambda v: isinstance(v, str), "must be a path string"),
        'v0': (lambda v: _is_number(v) and v >= 0, "must be >= 0"),
        'max_substep': (lambda v: _is_number(v) and v > 0, "must be positive"),
        'bootstrap_speed': (lambda v: _is_number(v) and v > 0, "must be positive"),
    },
    'sampler': {
        'variance': (lambda v: _is_number_list(v) and len(v) == INPUT_DIM and all(x > 0 for x in v),
                     f"must be a list of {INPUT_DIM} positive numbers"),
        'n_samples': (lambda v: _is_int(v) and v >= 1, "must be an integer >= 1"),
        'horizon': (lambda v: _is_int(v) and v >= 1, "must be an integer >= 1"),
    },
    'mppi': {
        'temperature': (lambda v: _is_number(v) and v > 0, "must be positive"),
        'weight_floor': (lambda v: _is_number(v) and 0 <= v < 1, "must be in [0, 1)"),
        'optimizer': (lambda v: v in OPTIMIZERS, f"must be one of {list(OPTIMIZERS)}"),
        'backup': (lambda v: isinstance(v, bool), "must be true or false"),
    },
    'penalty': {
        'n_pairs': (lambda v: _is_int(v) and v >= 1, "must be an integer >= 1"),
        'lambda_max_x': (lambda v: _is_number(v) and v > 0, "must be positive"),
        'lambda_max_cs': (lambda v: _is_number(v) and v > 0, "must be positive"),
        'mode': (lambda v: v in PENALTY_MODES, f"must be one of {list(PENALTY_MODES)}"),
        'fixed_low': (lambda v: _is_number_list(v) and len(v) == 2 and all(x >= 0 for x in v),
                      "must be a list of 2 non-negative numbers"),
        'resample': (lambda v: v in RESAMPLE_POLICIES, f"must be one of {list(RESAMPLE_POLICIES)}"),
        'terminal_tolerance': (lambda v: _is_number(v) and v >= 0, "must be >= 0"),
    },
    'cem': {
        'elite_fraction': (lambda v: _is_number(v) and 0 < v <= 1, "must be in (0, 1]"),
        'iterations': (lambda v: _is_int(v) and v >= 1, "must be an integer >= 1"),
        'min_std': (lambda v: _is_number(v) and v > 0, "must be positive"),
    },
    'safe_set': {
        'k_neighbors': (lambda v: _is_int(v) and v >= 1, "must be an integer >= 1"),
        'normalize': (lambda v: isinstance(v, bool), "must be true or false"),
        'hull_max_iter': (lambda v: _is_int(v) and v >= 1, "must be an integer >= 1"),
        'hull_tol': (lambda v: _is_number(v) and v > 0, "must be positive"),
    },
    'value_function': {
        'epochs': (lambda v: _is_int(v) and v >= 1, "must be an integer >= 1"),
        'learning_rate': (lambda v: _is_number(v) and v > 0, "must be positive"),
        'batch_size': (lambda v: _is_int(v) and v >= 1, "must be an integer >= 1"),
        'latent_samples': (lambda v: _is_int(v) and v >= 1, "must be an integer >= 1"),
        'warm_start': (lambda v: isinstance(v, bool), "must be true or false"),
        'n_layers': (lambda v: _is_int(v) and v >= 1, "must be an integer >= 1"),
        'hidden': (lambda v: _is_int(v) and v >= 1, "must be an integer >= 1"),
        'n_bins': (lambda v: _is_int(v) and v >= 2, "must be an integer >= 2"),
        'tail_bound': (lambda v: _is_number(v) and v > 0, "must be positive"),
    },
    'loop': {
        'step_cap': (lambda v: _is_int(v) and v >= 0, "must be an integer >= 0 (0 derives it from the bootstrap)"),
        'step_cap_factor': (lambda v: _is_number(v) and v > 0, "must be positive"),
        'pretrain_on_bootstrap': (lambda v: isinstance(v, bool), "must be true or false"),
    },
}

REQUIRED = {
    'experiment': ('name',),
    'environment': ('kind',),
}


def validate_experiment_data(data: Dict, base_dir: Optional[Path] = None) -> Tuple[bool, List[str]]:
    """
    Validate a parsed experiment config.

    Args:
        data: Parsed TOML document
        base_dir: Directory relative paths resolve against

    Returns:
        Tuple of (is_valid, list of problems)
    """
    problems: List[str] = []
    if not isinstance(data, dict):
        return False, ["config must be a table"]

    for section in data:
        if section not in SCHEMA:
            problems.append(f"unknown section [{section}]")
    for section, rules in SCHEMA.items():
        table = data.get(section, {})
        if not isinstance(table, dict):
            problems.append(f"[{section}] must be a table")
            continue
        for key in table:
            if key not in rules:
                problems.append(f"{section}.{key}: unknown key")
        for key in REQUIRED.get(section, ()):
            if key not in table:
                problems.append(f"{section}.{key}: required")
        for key, (check, message) in rules.items():
            if key in table and not check(table[key]):
                problems.append(f"{section}.{key}: {message} (got {table[key]!r})")

    problems.extend(_cross_checks(data, base_dir))
    return len(problems) == 0, problems


def _cross_checks(data: Dict, base_dir: Optional[Path]) -> List[str]:
    problems = []
    env = data.get('environment', {}) if isinstance(data.get('environment'), dict) else {}
    kind = env.get('kind')
    if kind in PLANT_STATE_DIM and _is_number_list(env.get('observation_std')):
        n = PLANT_STATE_DIM[kind]
        if len(env['observation_std']) != n:
            problems.append(f"environment.observation_std: must have {n} entries for {kind}")
    if kind == 'racing':
        for key in ('track_file', 'vehicle_file'):
            value = env.get(key)
            if not value:
                problems.append(f"environment.{key}: required for racing")
            elif isinstance(value, str) and not resolve_path(value, base_dir).is_file():
                problems.append(f"environment.{key}: file not found: {value}")

    sampler = data.get('sampler', {}) if isinstance(data.get('sampler'), dict) else {}
    loop = data.get('loop', {}) if isinstance(data.get('loop'), dict) else {}
    horizon = sampler.get('horizon', 30)
    step_cap = loop.get('step_cap', 0)
    if _is_int(step_cap) and _is_int(horizon) and 0 < step_cap <= horizon:
        problems.append(f"loop.step_cap: must exceed sampler.horizon ({horizon})")
    return problems


def resolve_path(value: str, base_dir: Optional[Path]) -> Path:
    path = Path(value)
    if not path.is_absolute() and base_dir is not None:
        path = Path(base_dir) / path
    return path
