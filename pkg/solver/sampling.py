"""
Control-sequence sampling and the batched rollout engine.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from systems.environments import Environment
from utils.rng import truncated_normal


@dataclass(frozen=True)
class SamplerConfig:
    """Truncated-normal sampling distribution for N sequences of length T."""
    variance: np.ndarray
    u_lo: np.ndarray
    u_hi: np.ndarray
    n_samples: int = 1024
    horizon: int = 30
    seed: int = 0

    def __post_init__(self):
        var = np.asarray(self.variance, dtype=float).reshape(-1)
        lo = np.asarray(self.u_lo, dtype=float).reshape(-1)
        hi = np.asarray(self.u_hi, dtype=float).reshape(-1)
        if not (len(var) == len(lo) == len(hi)):
            raise ValueError("variance and bounds must have the input dimension")
        if np.any(var <= 0):
            raise ValueError("sampling variances must be positive")
        if np.any(lo > hi):
            raise ValueError("lower input bound exceeds upper bound")
        if self.n_samples < 1 or self.horizon < 1:
            raise ValueError("n_samples and horizon must be >= 1")
        object.__setattr__(self, 'variance', var)
        object.__setattr__(self, 'u_lo', lo)
        object.__setattr__(self, 'u_hi', hi)

    @property
    def n_u(self) -> int:
        return len(self.variance)

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.variance)


def sample_truncated_normal_sequences(mean: np.ndarray, config: SamplerConfig,
                                      rng: np.random.Generator,
                                      std: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Draw N control sequences around ``mean`` from a per-coordinate truncated normal.
    
    Args:
        mean: (T, n_u) mean sequence
        config: Sampling distribution
        rng: Random stream
        std: Optional (T, n_u) or (n_u,) std overriding sqrt(variance)
    
    Returns:
        (N, T, n_u) array, every value inside the input box
    """
    mean = np.asarray(mean, dtype=float)
    if mean.shape != (config.horizon, config.n_u):
        raise ValueError(f"mean has shape {mean.shape}, expected {(config.horizon, config.n_u)}")
    scale = config.std if std is None else np.asarray(std, dtype=float)
    size = (config.n_samples, config.horizon, config.n_u)
    return truncated_normal(rng, mean, scale, config.u_lo, config.u_hi, size=size)


def warm_start_shift(previous: np.ndarray) -> np.ndarray:
    """Drop the first element and repeat the last one."""
    previous = np.asarray(previous, dtype=float)
    if len(previous) == 0:
        return previous.copy()
    return np.concatenate([previous[1:], previous[-1:]], axis=0)


@dataclass
class RolloutBatch:
    """
    Noise-free rollouts of N control sequences from one state.
    
    Sums run over k = t..t+T-1 and stop at target entry. ``d_terminal`` is the
    admissible-set distance of the last state (0 once absorbed). Diverged
    samples carry an infinite ``h_sums`` entry.
    """
    controls: np.ndarray
    states: np.ndarray
    h_sums: np.ndarray
    d_sums: np.ndarray
    d_terminal: np.ndarray
    absorbed: np.ndarray
    diverged: np.ndarray

    @property
    def terminal_states(self) -> np.ndarray:
        return self.states[:, -1, :]

    def __len__(self) -> int:
        return len(self.controls)


def rollout_batch(x_t: np.ndarray, controls: np.ndarray, env: Environment) -> RolloutBatch:
    """
    Simulate x_{k+1} = f(x_k, u_k, 0) for every sample.
    
    Args:
        x_t: Current (measured) state
        controls: (N, T, n_u) sampled sequences
        env: Environment providing dynamics, costs and constraint distance
    
    Returns:
        RolloutBatch with per-sample stage-cost and constraint sums
    """
    controls = np.asarray(controls, dtype=float)
    n, horizon, _ = controls.shape
    x = np.repeat(np.asarray(x_t, dtype=float)[None, :], n, axis=0)
    states = np.empty((n, horizon + 1, x.shape[1]))
    states[:, 0] = x
    h_sums = np.zeros(n)
    d_sums = np.zeros(n)
    absorbed = np.asarray(env.in_target(x), dtype=bool)
    diverged = np.zeros(n, dtype=bool)

    with np.errstate(invalid='ignore', over='ignore'):
        for k in range(horizon):
            u = controls[:, k]
            active = ~(absorbed | diverged)
            h_sums += np.where(active, env.stage_cost(x, u), 0.0)
            d_sums += np.where(active, env.admissible_distance(x), 0.0)
            x_next = env.step(x, u)
            bad = ~np.all(np.isfinite(x_next), axis=1)
            # Freeze diverged samples at their last finite state
            x_next = np.where(bad[:, None], x, x_next)
            diverged |= bad & ~absorbed
            absorbed |= ~diverged & np.asarray(env.in_target(x_next), dtype=bool)
            x = x_next
            states[:, k + 1] = x

    d_terminal = np.where(absorbed | diverged, 0.0, env.admissible_distance(x))
    h_sums = np.where(diverged, np.inf, h_sums)
    d_sums = np.where(diverged, 0.0, d_sums)
    return RolloutBatch(controls, states, h_sums, d_sums, d_terminal, absorbed, diverged)


def sample_penalty_grid(n_pairs: int, lambda_max_x: float, lambda_max_cs: float,
                        rng: np.random.Generator) -> np.ndarray:
    """P i.i.d. pairs uniform on [0, lambda_max_x] x [0, lambda_max_cs]; shape (P, 2)."""
    if n_pairs < 1:
        raise ValueError("need at least one penalty pair")
    if lambda_max_x <= 0 or lambda_max_cs <= 0:
        raise ValueError("penalty maxima must be positive")
    unit = rng.random((n_pairs, 2))
    return unit * np.array([lambda_max_x, lambda_max_cs])
