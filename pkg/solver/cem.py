"""
Cross-entropy method baseline: refit the sampling mean (and spread) to the
lowest-cost elites.
"""
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

ResampleFn = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]


def elite_statistics(costs: np.ndarray, controls: np.ndarray,
                     elite_fraction: float) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and std of the lowest-cost ``elite_fraction`` of samples (stable order on ties)."""
    if not 0.0 < elite_fraction <= 1.0:
        raise ValueError("elite_fraction must be in (0, 1]")
    costs = np.asarray(costs, dtype=float)
    controls = np.asarray(controls, dtype=float)
    n_elite = min(len(costs), max(1, int(round(elite_fraction * len(costs)))))
    elites = np.argsort(costs, kind='stable')[:n_elite]
    elite_controls = controls[elites]
    return elite_controls.mean(axis=0), elite_controls.std(axis=0)


def cem_update(costs: np.ndarray, controls: np.ndarray, elite_fraction: float,
               iterations: int = 1, resample: Optional[ResampleFn] = None,
               min_std: float = 1e-3) -> np.ndarray:
    """
    Elite-mean control sequence after ``iterations`` refits.
    
    Args:
        costs: (N,) costs of the given samples
        controls: (N, T, n_u) samples
        elite_fraction: Share of samples kept as elites
        iterations: Number of refits; refits after the first draw a new batch
        resample: (mean, std) -> (costs, controls); required when iterations > 1
        min_std: Floor on the refit spread passed to ``resample``
    
    Returns:
        (T, n_u) elite mean
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if iterations > 1 and resample is None:
        raise ValueError("resample callback required for more than one iteration")
    mean, std = elite_statistics(costs, controls, elite_fraction)
    for _ in range(iterations - 1):
        costs, controls = resample(mean, np.maximum(std, min_std))
        mean, std = elite_statistics(costs, controls, elite_fraction)
    return mean


@dataclass(frozen=True)
class CemSettings:
    elite_fraction: float = 0.1
    iterations: int = 3
    min_std: float = 1e-3
