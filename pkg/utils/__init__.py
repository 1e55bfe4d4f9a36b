"""
Utility modules for the experiment harness.

Includes:
- log: logger setup with bracketed level tags
- rng: seeded random streams and truncated-normal sampling
- files: atomic writes
- validators: experiment-config schema and range checks
- experiment_config: TOML loading, CLI overrides and ablation variants
- plotting: SVG figures of finished runs

Only the leaf modules are re-exported here. experiment_config and plotting
depend on the solver, value-function and systems packages, which in turn
import from utils, so they are imported by their full module path.
"""

from .files import atomic_write_bytes, atomic_write_text
from .log import get_logger
from .rng import stream, truncated_normal

__all__ = [
    'atomic_write_bytes',
    'atomic_write_text',
    'get_logger',
    'stream',
    'truncated_normal',
]
