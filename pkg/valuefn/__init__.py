"""
Learned terminal value: a conditional spline flow over iteration costs.
"""
from .model import SplineFlowModel, flow_forward, flow_inverse_logdet, load_model, save_model, value_estimate
from .training import TrainConfig, initial_model, train

__all__ = [
    'SplineFlowModel',
    'TrainConfig',
    'flow_forward',
    'flow_inverse_logdet',
    'initial_model',
    'load_model',
    'save_model',
    'train',
    'value_estimate',
]
