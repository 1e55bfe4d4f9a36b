"""
Sampling controller: rollouts, importance weights, CEM refits and the
adaptive-penalty selection.
"""
from .controller import ApMppiController, StepResult
from .mppi import MppiConfig, importance_weights, weighted_control_average
from .penalty import PenaltySettings, select_lambda
from .sampling import SamplerConfig, rollout_batch, sample_penalty_grid, sample_truncated_normal_sequences

__all__ = [
    'ApMppiController',
    'MppiConfig',
    'PenaltySettings',
    'SamplerConfig',
    'StepResult',
    'importance_weights',
    'rollout_batch',
    'sample_penalty_grid',
    'sample_truncated_normal_sequences',
    'select_lambda',
    'weighted_control_average',
]
