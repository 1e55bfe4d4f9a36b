"""
Experiment configuration: one TOML file per experiment, parsed into frozen
dataclasses. CLI overrides are merged over the parsed file before the
dataclasses are built, so a single validation pass sees the final values.
"""
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from config import Config
from core.errors import ConfigError
from solver.cem import CemSettings
from solver.penalty import PenaltySettings
from utils.log import get_logger
from utils.validators import PLANT_STATE_DIM, resolve_path, validate_experiment_data
from valuefn.training import TrainConfig

logger = get_logger('config')

# Per-environment defaults for keys a config may leave out
KIND_DEFAULTS = {
    'point_mass': {'dt': 0.1, 'horizon': 30, 'variance': (0.25, 0.25)},
    'racing': {'dt': 0.05, 'horizon': 40, 'variance': (4.0, 0.04)},
}

PENALTY_VARIANTS = {'ap': 'adaptive', 'fixed-high': 'fixed_high', 'fixed-low': 'fixed_low'}
VARIANT_OPTIMIZERS = ('mppi', 'cem')


@dataclass(frozen=True)
class EnvironmentSettings:
    kind: str = 'point_mass'
    dt: float = 0.1
    observation_std: Tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)
    actuation_std: Tuple[float, ...] = (0.0, 0.0)
    noise_truncation: float = 2.0
    # point mass
    obstacle_center: Tuple[float, float] = (30.0, 0.0)
    obstacle_radius: float = 10.0
    target: Tuple[float, ...] = (60.0, 0.0, 0.0, 0.0)
    target_position_tol: float = 1.0
    target_velocity_tol: float = 0.5
    initial_state: Tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)
    # racing
    track_file: str = ''
    track_closed: bool = True
    vehicle_file: str = ''
    v0: float = 3.0
    max_substep: float = 0.02
    bootstrap_speed: float = 4.0


@dataclass(frozen=True)
class SamplerSettings:
    variance: Tuple[float, ...] = (0.25, 0.25)
    n_samples: int = 1024
    horizon: int = 30


@dataclass(frozen=True)
class MppiSettings:
    temperature: float = 5.0
    weight_floor: float = 0.0
    optimizer: str = 'mppi'
    backup: bool = True


@dataclass(frozen=True)
class SafeSetSettings:
    k_neighbors: int = 32
    normalize: bool = True
    hull_max_iter: int = 200
    hull_tol: float = 1e-9


@dataclass(frozen=True)
class LoopSettings:
    # 0 derives the cap from the bootstrap episode length
    step_cap: int = 0
    step_cap_factor: float = 4.0
    pretrain_on_bootstrap: bool = True

    def resolve_step_cap(self, bootstrap_length: int, horizon: int) -> int:
        if self.step_cap > 0:
            return self.step_cap
        return max(int(round(self.step_cap_factor * bootstrap_length)), horizon + 1)


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    seeds: Tuple[int, ...] = (0,)
    iterations: int = 20
    output_dir: str = 'out'
    variant: str = ''
    workers: int = 1
    environment: EnvironmentSettings = field(default_factory=EnvironmentSettings)
    sampler: SamplerSettings = field(default_factory=SamplerSettings)
    mppi: MppiSettings = field(default_factory=MppiSettings)
    penalty: PenaltySettings = field(default_factory=PenaltySettings)
    cem: CemSettings = field(default_factory=CemSettings)
    safe_set: SafeSetSettings = field(default_factory=SafeSetSettings)
    value_function: TrainConfig = field(default_factory=TrainConfig)
    loop: LoopSettings = field(default_factory=LoopSettings)
    source: str = ''

    @property
    def label(self) -> str:
        return f"{self.name}-{self.variant}" if self.variant else self.name

    def to_dict(self) -> Dict:
        """Plain-data form, the inverse of ``config_from_dict``."""
        sections = {}
        for section in ('environment', 'sampler', 'mppi', 'penalty', 'cem',
                        'safe_set', 'value_function', 'loop'):
            sections[section] = _plain(getattr(self, section).__dict__)
        sections['experiment'] = {
            'name': self.name,
            'seeds': list(self.seeds),
            'iterations': self.iterations,
            'output_dir': self.output_dir,
            'variant': self.variant,
            'workers': self.workers,
        }
        return sections


def _plain(values: Dict) -> Dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in values.items()}


def _tuples(values: Dict) -> Dict:
    return {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}


def merge_overrides(data: Dict, overrides: Optional[Dict]) -> Dict:
    """
    Merge CLI overrides over a parsed config.

    Args:
        data: Parsed TOML document
        overrides: Keys among seeds, iterations, output_dir, variant, workers;
            None values are ignored

    Returns:
        New document; the input is not modified
    """
    merged = {section: dict(table) if isinstance(table, dict) else table
              for section, table in data.items()}
    experiment = merged.get('experiment', {}).copy()
    experiment.update({k: v for k, v in (overrides or {}).items() if v is not None})
    merged['experiment'] = experiment
    return merged


def apply_variant(data: Dict, variant: str) -> Dict:
    """
    Rewrite a parsed config for an ablation variant such as ``ap-mppi``,
    ``fixed-high-mppi`` or ``fixed-low-cem``.

    Raises:
        ConfigError: If the variant name is not recognized
    """
    penalty_name, _, optimizer = variant.lower().rpartition('-')
    if penalty_name not in PENALTY_VARIANTS or optimizer not in VARIANT_OPTIMIZERS:
        raise ConfigError([f"unknown variant {variant!r}; expected "
                           f"<{'|'.join(PENALTY_VARIANTS)}>-<{'|'.join(VARIANT_OPTIMIZERS)}>"])
    out = {section: dict(table) for section, table in data.items()}
    out.setdefault('penalty', {})['mode'] = PENALTY_VARIANTS[penalty_name]
    out.setdefault('mppi', {})['optimizer'] = optimizer
    out.setdefault('experiment', {})['variant'] = variant.lower()
    return out


def read_config_data(path) -> Dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file not found: {path}"])
    try:
        with open(path, 'rb') as f:
            return tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError([f"{path}: {e}"]) from e


def config_from_dict(data: Dict, base_dir: Optional[Path] = None, source: str = '') -> ExperimentConfig:
    """
    Build an ``ExperimentConfig`` from a parsed document.

    Raises:
        ConfigError: Listing every problem found
    """
    is_valid, problems = validate_experiment_data(data, base_dir)
    if not is_valid:
        raise ConfigError(problems)

    experiment = dict(data.get('experiment', {}))
    env_table = dict(data.get('environment', {}))
    kind = env_table['kind']
    defaults = KIND_DEFAULTS[kind]

    env_table.setdefault('dt', defaults['dt'])
    env_table.setdefault('observation_std', [0.0] * PLANT_STATE_DIM[kind])
    for key in ('track_file', 'vehicle_file'):
        if env_table.get(key):
            env_table[key] = str(resolve_path(env_table[key], base_dir))

    sampler_table = dict(data.get('sampler', {}))
    sampler_table.setdefault('horizon', defaults['horizon'])
    sampler_table.setdefault('variance', list(defaults['variance']))

    try:
        return ExperimentConfig(
            name=experiment['name'],
            seeds=tuple(experiment.get('seeds', [0])),
            iterations=experiment.get('iterations', 20),
            output_dir=str(experiment.get('output_dir', Config.OUTPUT_DIR)),
            variant=experiment.get('variant', ''),
            workers=experiment.get('workers', Config.WORKERS),
            environment=EnvironmentSettings(**_tuples(env_table)),
            sampler=SamplerSettings(**_tuples(sampler_table)),
            mppi=MppiSettings(**data.get('mppi', {})),
            penalty=PenaltySettings(**_tuples(data.get('penalty', {}))),
            cem=CemSettings(**data.get('cem', {})),
            safe_set=SafeSetSettings(**data.get('safe_set', {})),
            value_function=TrainConfig(**data.get('value_function', {})),
            loop=LoopSettings(**data.get('loop', {})),
            source=source,
        )
    except (TypeError, ValueError) as e:
        raise ConfigError([str(e)]) from e


def load_config(path, overrides: Optional[Dict] = None) -> ExperimentConfig:
    """
    Load, merge and validate an experiment config.

    Args:
        path: TOML file
        overrides: CLI overrides (see ``merge_overrides``); ``variant`` is
            applied as an ablation variant

    Returns:
        Validated ExperimentConfig

    Raises:
        ConfigError: Listing every problem found
    """
    path = Path(path)
    data = merge_overrides(read_config_data(path), overrides)
    variant = data['experiment'].get('variant')
    if variant:
        data = apply_variant(data, variant)
    config = config_from_dict(data, base_dir=path.parent, source=str(path))
    logger.debug(f"Loaded config {config.label} from {path}")
    return config


def variant_configs(path, variants: Sequence[str], overrides: Optional[Dict] = None) -> List[ExperimentConfig]:
    """One config per ablation variant, all sharing the same seeds."""
    base = merge_overrides(read_config_data(path), overrides)
    configs = []
    problems = []
    for variant in variants:
        try:
            data = apply_variant(base, variant)
            configs.append(config_from_dict(data, base_dir=Path(path).parent, source=str(path)))
        except ConfigError as e:
            problems.extend(e.problems)
    if problems:
        raise ConfigError(problems)
    return configs


def validate_config(path) -> Tuple[bool, List[str]]:
    """
    Check a config file without building anything.

    Returns:
        Tuple of (is_valid, list of problems)
    """
    try:
        data = read_config_data(path)
        if data.get('experiment', {}).get('variant'):
            data = apply_variant(data, data['experiment']['variant'])
    except ConfigError as e:
        return False, list(e.problems)
    return validate_experiment_data(data, Path(path).parent)


def with_iterations(config: ExperimentConfig, iterations: int) -> ExperimentConfig:
    return replace(config, iterations=iterations)
