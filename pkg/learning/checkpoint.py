"""
Run checkpoints.

A checkpoint directory holds:
    run.json       config, seed, iteration cursor, step cap
    safeset.json   safe set entries
    model.npz      value model
    records.jsonl  demonstration first, then one learning iteration per line

Each file is written atomically; run.json is written last so a directory with
a run.json always has the other three files of the same iteration.
"""
import json
from pathlib import Path
from typing import List, Union

from core.errors import CheckpointError, ConfigError
from core.safe_set import load_safe_set, save_safe_set
from core.types import IterationRecord
from learning.loop import RunState
from utils.experiment_config import config_from_dict
from utils.files import atomic_write_text
from utils.log import get_logger
from valuefn import load_model, save_model

logger = get_logger('checkpoint')

CHECKPOINT_VERSION = 1
RUN_FILE = 'run.json'
SAFE_SET_FILE = 'safeset.json'
MODEL_FILE = 'model.npz'
RECORDS_FILE = 'records.jsonl'


def records_to_jsonl(records: List[IterationRecord]) -> str:
    return ''.join(json.dumps(r.to_dict()) + '\n' for r in records)


def records_from_jsonl(text: str) -> List[IterationRecord]:
    return [IterationRecord.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]


def checkpoint(run: RunState, path: Union[str, Path]) -> Path:
    """
    Persist a run state.

    Args:
        run: State to save
        path: Checkpoint directory (created if needed)

    Returns:
        The checkpoint directory
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    save_safe_set(run.safe_set, path / SAFE_SET_FILE)
    save_model(run.model, path / MODEL_FILE)
    atomic_write_text(path / RECORDS_FILE, records_to_jsonl([run.bootstrap] + run.records))
    header = {
        'version': CHECKPOINT_VERSION,
        'seed': run.seed,
        'iteration': run.iteration,
        'step_cap': run.step_cap,
        'config': run.config.to_dict(),
    }
    atomic_write_text(path / RUN_FILE, json.dumps(header, indent=2))
    logger.debug(f"Checkpoint of seed {run.seed} at iteration {run.iteration} written to {path}")
    return path


def resume(path: Union[str, Path]) -> RunState:
    """
    Restore a run state written by ``checkpoint``.

    Raises:
        CheckpointError: If a file is missing, corrupt or of another version
    """
    path = Path(path)
    run_file = path / RUN_FILE
    if not run_file.is_file():
        raise CheckpointError(f"no checkpoint at {path}")
    try:
        header = json.loads(run_file.read_text())
    except ValueError as e:
        raise CheckpointError(f"corrupt checkpoint header {run_file}: {e}") from e
    if header.get('version') != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {header.get('version')!r}")

    try:
        config = config_from_dict(header['config'])
    except ConfigError as e:
        raise CheckpointError(f"checkpoint config is invalid: {e}") from e
    except KeyError as e:
        raise CheckpointError(f"checkpoint header is missing {e}") from e

    records_file = path / RECORDS_FILE
    if not records_file.is_file():
        raise CheckpointError(f"checkpoint records {records_file} not found")
    try:
        records = records_from_jsonl(records_file.read_text())
    except (ValueError, KeyError, TypeError) as e:
        raise CheckpointError(f"corrupt checkpoint records {records_file}: {e}") from e
    if not records or records[0].iteration != 0:
        raise CheckpointError(f"checkpoint records {records_file} do not start with the demonstration")

    run = RunState(
        config=config,
        seed=int(header['seed']),
        iteration=int(header['iteration']),
        safe_set=load_safe_set(path / SAFE_SET_FILE),
        model=load_model(path / MODEL_FILE),
        bootstrap=records[0],
        step_cap=int(header['step_cap']),
        records=records[1:],
    )
    if len(run.records) != run.iteration:
        raise CheckpointError(f"checkpoint holds {len(run.records)} records for iteration {run.iteration}")
    logger.info(f"Resumed seed {run.seed} at iteration {run.iteration} from {path}")
    return run
