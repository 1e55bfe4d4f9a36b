"""
Demonstrations, episodes and the iterative learning loop.
"""
from .bootstrap import bootstrap_safe_set, demonstration
from .checkpoint import checkpoint, resume
from .loop import RunState, advance_iteration, run_episode, run_iterations, start_run

__all__ = [
    'RunState',
    'advance_iteration',
    'bootstrap_safe_set',
    'checkpoint',
    'demonstration',
    'resume',
    'run_episode',
    'run_iterations',
    'start_run',
]
