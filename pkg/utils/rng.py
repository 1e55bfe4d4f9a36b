"""
Seeded random streams and the truncated-normal primitive.

Every random draw in a run comes from a stream keyed by
(master seed, purpose, indices...), so results never depend on the order in
which work is scheduled and a run can resume from its iteration index alone.
"""
from typing import Union

import numpy as np
from scipy.special import ndtr, ndtri

# Stream purposes
CONTROLS = 1
LATENT = 2
PENALTY = 3
OBSERVATION = 4
ACTUATION = 5
TRAINING = 6
CEM = 7


def stream(master_seed: int, purpose: int, *indices: int) -> np.random.Generator:
    """
    Build a counter-based generator for one (seed, purpose, indices) key.
    
    Args:
        master_seed: Experiment seed
        purpose: One of the purpose constants above
        *indices: e.g. iteration and time step
    
    Returns:
        Philox-backed numpy Generator
    """
    key = (int(purpose),) + tuple(int(i) for i in indices)
    seq = np.random.SeedSequence(int(master_seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(seq))


def truncated_normal(rng: np.random.Generator,
                     mean: Union[float, np.ndarray],
                     std: Union[float, np.ndarray],
                     lo: Union[float, np.ndarray],
                     hi: Union[float, np.ndarray],
                     size=None) -> np.ndarray:
    """
    Draw from N(mean, std²) truncated to [lo, hi] by inverse-CDF transform.
    
    All array arguments broadcast against ``size``. Coordinates with zero
    probability mass between the bounds (std -> 0, or lo == hi) return the
    mean clamped into the bounds.
    """
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if size is None:
        size = np.broadcast(mean, std, lo, hi).shape
    mean, std, lo, hi = (np.broadcast_to(a, size) for a in (mean, std, lo, hi))

    u = rng.random(size)
    safe_std = np.where(std > 0, std, 1.0)
    a = (lo - mean) / safe_std
    b = (hi - mean) / safe_std

    # Sample in the lower tail where the CDF has resolution: reflect when the
    # whole window sits above the mean.
    flip = a > 0
    a_, b_ = np.where(flip, -b, a), np.where(flip, -a, b)
    cdf_a, cdf_b = ndtr(a_), ndtr(b_)
    mass = cdf_b - cdf_a
    with np.errstate(invalid='ignore', divide='ignore'):
        z = ndtri(np.clip(cdf_a + u * mass, 1e-300, 1.0))
    z = np.where(flip, -z, z)

    samples = mean + safe_std * z
    clamped_mean = np.clip(mean, lo, hi)
    degenerate = (std <= 0) | (mass <= 0) | ~np.isfinite(samples)
    samples = np.where(degenerate, clamped_mean, samples)
    return np.clip(samples, lo, hi)
