"""
Truncated Gaussian disturbances on observations and applied inputs.
"""
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from utils.rng import truncated_normal


@dataclass(frozen=True)
class DisturbanceModel:
    """
    Zero-mean truncated normal noise.
    
    Observation noise perturbs the plant coordinates seen by the controller;
    actuation noise perturbs the applied input. Each coordinate is truncated to
    ``truncation`` standard deviations, so every draw lies in a bounded set.
    """
    observation_std: np.ndarray
    actuation_std: np.ndarray
    truncation: float = 2.0

    def __post_init__(self):
        obs = np.asarray(self.observation_std, dtype=float).reshape(-1)
        act = np.asarray(self.actuation_std, dtype=float).reshape(-1)
        if np.any(obs < 0) or np.any(act < 0):
            raise ValueError("noise scales must be nonnegative")
        if self.truncation <= 0:
            raise ValueError("truncation must be positive")
        object.__setattr__(self, 'observation_std', obs)
        object.__setattr__(self, 'actuation_std', act)

    @classmethod
    def noise_free(cls, n_plant: int, n_u: int) -> 'DisturbanceModel':
        return cls(np.zeros(n_plant), np.zeros(n_u))

    @classmethod
    def from_scales(cls, observation_std: Sequence[float], actuation_std: Sequence[float],
                    truncation: float = 2.0) -> 'DisturbanceModel':
        return cls(np.asarray(observation_std, dtype=float), np.asarray(actuation_std, dtype=float), truncation)

    @property
    def observation_bound(self) -> np.ndarray:
        return self.truncation * self.observation_std

    @property
    def actuation_bound(self) -> np.ndarray:
        return self.truncation * self.actuation_std

    @property
    def is_noise_free(self) -> bool:
        return not (np.any(self.observation_std > 0) or np.any(self.actuation_std > 0))

    def sample_observation(self, rng: np.random.Generator, size=None) -> np.ndarray:
        shape = self._shape(size, len(self.observation_std))
        b = self.observation_bound
        return truncated_normal(rng, 0.0, self.observation_std, -b, b, size=shape)

    def sample_actuation(self, rng: np.random.Generator, size=None) -> np.ndarray:
        shape = self._shape(size, len(self.actuation_std))
        b = self.actuation_bound
        return truncated_normal(rng, 0.0, self.actuation_std, -b, b, size=shape)

    @staticmethod
    def _shape(size, n: int) -> tuple:
        if size is None:
            return (n,)
        if isinstance(size, int):
            return (size, n)
        return tuple(size) + (n,)
