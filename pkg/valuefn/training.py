"""
Fitting the cost flow to the safe-set dataset by minibatch maximum likelihood.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from core.errors import TrainingError
from core.safe_set import Dataset
from utils.log import get_logger
from valuefn.model import FlowArchitecture, SplineFlowModel
from valuefn.optim import Adam
from valuefn.spline import SplineShape

logger = get_logger('training')


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    learning_rate: float = 1e-4
    batch_size: int = 256
    latent_samples: int = 32
    # Reuse the previous model's weights as the starting point
    warm_start: bool = True
    n_layers: int = 4
    hidden: int = 96
    n_bins: int = 8
    tail_bound: float = 4.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.latent_samples < 1:
            raise ValueError("batch_size and latent_samples must be >= 1")

    def architecture(self, n_context: int) -> FlowArchitecture:
        return FlowArchitecture(
            n_context=n_context,
            n_layers=self.n_layers,
            hidden=self.hidden,
            spline=SplineShape(n_bins=self.n_bins, bound=self.tail_bound),
        )


def initial_model(dataset: Dataset, config: TrainConfig, rng: np.random.Generator) -> SplineFlowModel:
    """Identity-initialized model with normalizers fit to the dataset."""
    arch = config.architecture(dataset.states.shape[1])
    return SplineFlowModel.initialize(arch, rng, dataset.states, dataset.costs)


def train(dataset: Dataset, config: TrainConfig, rng: np.random.Generator,
          init_model: Optional[SplineFlowModel] = None) -> SplineFlowModel:
    """
    Minimize the mean negative log-likelihood of the dataset costs.
    
    Args:
        dataset: (state, cost-to-go) pairs
        config: Optimization settings
        rng: Stream for initialization and minibatch order
        init_model: Previous model to warm start from (same architecture)
    
    Returns:
        Trained model; ``loss_history`` holds the mean loss of every epoch
    
    Raises:
        TrainingError: If the dataset is empty or the loss becomes non-finite
    """
    states = np.asarray(dataset.states, dtype=float)
    costs = np.asarray(dataset.costs, dtype=float)
    if len(costs) == 0:
        raise TrainingError("cannot train on an empty dataset")

    arch = config.architecture(states.shape[1])
    if config.warm_start and init_model is not None and init_model.arch == arch:
        model = init_model.with_normalizers(states, costs)
    else:
        model = SplineFlowModel.initialize(arch, rng, states, costs)
    model.loss_history = []

    optimizer = Adam(config.learning_rate)
    params = model.params.copy()
    n = len(costs)
    batch = min(config.batch_size, n)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            loss, grad = model.nll_and_grad(states[idx], costs[idx], params)
            if not (np.isfinite(loss) and np.all(np.isfinite(grad))):
                raise TrainingError(f"non-finite loss at epoch {epoch}: {loss}")
            params = optimizer.step(params, grad)
            losses.append(loss * len(idx))
        model.loss_history.append(float(np.sum(losses) / n))

    model.params = params
    logger.info(f"Trained value model on {n} pairs: NLL {model.loss_history[0]:.4f} -> {model.loss_history[-1]:.4f}")
    return model
