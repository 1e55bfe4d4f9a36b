"""
Information-theoretic update: sampled cost assembly, importance weights and
the weighted control average.
"""
from dataclasses import dataclass

import numpy as np

from core.errors import NoFiniteSamplesError, NonFiniteCostError
from solver.sampling import RolloutBatch, SamplerConfig

DEFAULT_TEMPERATURE = 5.0


@dataclass(frozen=True)
class MppiConfig:
    sampler: SamplerConfig
    temperature: float = DEFAULT_TEMPERATURE
    # Weights below this (after normalization) are dropped and the rest renormalized
    weight_floor: float = 0.0

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if not 0.0 <= self.weight_floor < 1.0:
            raise ValueError("weight_floor must be in [0, 1)")


@dataclass
class CostBreakdown:
    """Per-sample cost components, computed once and shared by every penalty pair."""
    h_sum: np.ndarray
    d_x_sum: np.ndarray
    terminal_value: np.ndarray
    terminal_hull_distance: np.ndarray

    @classmethod
    def from_batch(cls, batch: RolloutBatch, terminal_value, terminal_hull_distance) -> 'CostBreakdown':
        return cls(batch.h_sums, batch.d_sums,
                   np.asarray(terminal_value, dtype=float),
                   np.asarray(terminal_hull_distance, dtype=float))

    def total(self, lam) -> np.ndarray:
        return _assemble(self.h_sum, self.d_x_sum, self.terminal_value, self.terminal_hull_distance, lam)


def _assemble(h_sum, d_sum, value, d_cs, lam) -> np.ndarray:
    parts = [np.asarray(a, dtype=float) for a in (h_sum, d_sum, value, d_cs)]
    n = len(parts[0])
    if any(p.shape != (n,) for p in parts):
        raise ValueError("cost components must all have length N")
    if any(np.any(np.isnan(p)) for p in parts):
        raise NonFiniteCostError("non-finite cost component")
    lam = np.asarray(lam, dtype=float)
    lam_x, lam_cs = lam[..., 0:1], lam[..., 1:2]
    h, d, v, c = parts
    # Penalties of infinite-cost samples are irrelevant; keep 0 * inf out of the sum
    with np.errstate(invalid='ignore'):
        total = h + v + np.where(d > 0, lam_x * d, 0.0) + np.where(c > 0, lam_cs * c, 0.0)
    if np.any(np.isnan(total)):
        raise NonFiniteCostError("non-finite cost component")
    return total if lam.ndim > 1 else total.reshape(n)


def assemble_costs(batch: RolloutBatch, terminal_value: np.ndarray, terminal_hull_distance: np.ndarray,
                   lam) -> np.ndarray:
    """
    Sampled cost h_sum + lam_x * d_sum + V + lam_cs * d_cs per sample.
    
    Args:
        batch: Rollouts for this step
        terminal_value: (N,) learned value at terminal states
        terminal_hull_distance: (N,) distance of terminal states to the safe-set hull
        lam: One pair (2,) or P pairs (P, 2)
    
    Returns:
        (N,) totals, or (P, N) when P pairs are given
    
    Raises:
        NonFiniteCostError: If any component is NaN
    """
    return _assemble(batch.h_sums, batch.d_sums, terminal_value, terminal_hull_distance, lam)


def importance_weights(totals: np.ndarray, temperature: float, weight_floor: float = 0.0) -> np.ndarray:
    """
    Softmax of -totals / temperature along the last axis.
    
    Costs are shifted by their finite minimum before exponentiation; infinite
    costs get weight 0. Weights below ``weight_floor`` are dropped, except the
    largest one(s) of each row, and the rest renormalized.
    
    Raises:
        NoFiniteSamplesError: If a row has no finite cost
    """
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    totals = np.asarray(totals, dtype=float)
    if np.any(np.isnan(totals)):
        raise NonFiniteCostError("non-finite cost component")
    finite = np.isfinite(totals)
    if not np.all(np.any(finite, axis=-1)):
        raise NoFiniteSamplesError("no finite-cost samples")
    rho = np.min(np.where(finite, totals, np.inf), axis=-1, keepdims=True)
    with np.errstate(invalid='ignore'):
        w = np.where(finite, np.exp(-(totals - rho) / temperature), 0.0)
    w /= np.sum(w, axis=-1, keepdims=True)
    if weight_floor > 0:
        # The largest weight always survives the floor
        top = w >= np.max(w, axis=-1, keepdims=True)
        w = np.where((w >= weight_floor) | top, w, 0.0)
        w /= np.sum(w, axis=-1, keepdims=True)
    return w


def weighted_control_average(controls: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """
    Convex combination of sampled sequences.
    
    Args:
        controls: (N, T, n_u)
        weights: (N,) or (P, N), each row summing to 1
    
    Returns:
        (T, n_u), or (P, T, n_u) for stacked weights
    """
    controls = np.asarray(controls, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if not np.allclose(np.sum(weights, axis=-1), 1.0, rtol=0.0, atol=1e-12):
        raise ValueError("weights must sum to 1")
    return np.einsum('...n,ntu->...tu', weights, controls)
