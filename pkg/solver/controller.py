"""
One receding-horizon step of the adaptive-penalty sampling controller.

A single batch of truncated-normal control sequences is rolled out per step;
its cost components are shared by every penalty pair. The selected sequence,
shifted by one step, is the sampling mean of the next step.

Besides the averaged control of each pair, every step also evaluates a backup
sequence: the stored inputs that followed the nearest safe-set state on the
first step, and afterwards the previous choice shifted by one step and
extended with the hull-weighted stored input at its terminal state. The backup
keeps a feasible candidate available while the sampled averages wander off
the stored trajectories.
"""
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from core.hull import hull_distances, hull_weights
from core.safe_set import SafeSet
from core.types import StepDiagnostics
from solver.cem import CemSettings, cem_update
from solver.mppi import MppiConfig, assemble_costs
from solver.penalty import (PenaltyCandidate, PenaltySettings, ValueFn, evaluate_candidates,
                            evaluate_control_candidates, selected_index)
from solver.sampling import (RolloutBatch, rollout_batch, sample_penalty_grid,
                             sample_truncated_normal_sequences, warm_start_shift)
from systems.environments import Environment
from utils.log import get_logger

logger = get_logger('controller')

OPTIMIZERS = ('mppi', 'cem')


@dataclass
class StepResult:
    control: np.ndarray
    sequence: np.ndarray
    lam: tuple
    nominal: np.ndarray
    candidates: List[PenaltyCandidate]
    diagnostics: StepDiagnostics


class ApMppiController:
    """Stateful across the steps of one episode (holds the warm start and the backup)."""

    def __init__(self, env: Environment, mppi: MppiConfig, penalty: PenaltySettings,
                 k_neighbors: int = 32, hull_max_iter: int = 200, hull_tol: float = 1e-9,
                 optimizer: str = 'mppi', cem: Optional[CemSettings] = None, backup: bool = True):
        if optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {optimizer!r}")
        self.env = env
        self.mppi = mppi
        self.sampler = mppi.sampler
        self.penalty = penalty
        self.k_neighbors = k_neighbors
        self.hull_max_iter = hull_max_iter
        self.hull_tol = hull_tol
        self.optimizer = optimizer
        self.cem = cem or CemSettings()
        self.use_backup = backup
        self.reset()

    def reset(self) -> None:
        """Zero warm start and no backup; called at the start of every episode."""
        self.mean = np.zeros((self.sampler.horizon, self.sampler.n_u))
        self.backup: Optional[np.ndarray] = None
        self._first_step = True

    def penalty_pairs(self, rng: np.random.Generator) -> np.ndarray:
        """The penalty pairs for the configured mode; only ``adaptive`` consumes ``rng``."""
        p = self.penalty
        if p.mode == 'fixed_high':
            return np.array([[p.lambda_max_x, p.lambda_max_cs]])
        if p.mode == 'fixed_low':
            return np.array([list(p.fixed_low)], dtype=float)
        return sample_penalty_grid(p.n_pairs, p.lambda_max_x, p.lambda_max_cs, rng)

    def terminal_costs(self, batch: RolloutBatch, safe_set: SafeSet, value_fn: ValueFn):
        """Learned value and safe-set hull distance at each open terminal state."""
        n = len(batch)
        value = np.zeros(n)
        d_cs = np.zeros(n)
        open_rows = ~(batch.absorbed | batch.diverged)
        if np.any(open_rows):
            features = self.env.features(batch.terminal_states[open_rows])
            value[open_rows] = value_fn(features)
            d_cs[open_rows] = hull_distances(features, safe_set, self.k_neighbors,
                                             self.hull_max_iter, self.hull_tol)
        return value, d_cs

    def step(self, x_t: np.ndarray, safe_set: SafeSet, value_fn: ValueFn, lambdas: np.ndarray,
             rng: np.random.Generator, rng_cem: Optional[np.random.Generator] = None) -> StepResult:
        """
        Compute the control to apply at state x_t.
        
        Args:
            x_t: Observed state
            safe_set: Safe set of previous iterations (read-only)
            value_fn: Batched terminal value on feature vectors
            lambdas: (P, 2) penalty pairs for this step
            rng: Stream for the control samples
            rng_cem: Stream for CEM refit batches
        
        Returns:
            StepResult; ``candidates`` holds the P averaged candidates followed
            by the P backup candidates when a backup is available
        
        Raises:
            NoFiniteSamplesError: If every sampled rollout diverged
        """
        x_t = np.asarray(x_t, dtype=float)
        lambdas = np.array(lambdas, dtype=float, ndmin=2)
        if self._first_step:
            self._first_step = False
            if self.use_backup:
                self.backup = safe_set.continuation(self.env.features(x_t[None, :])[0], self.sampler.horizon)

        controls = sample_truncated_normal_sequences(self.mean, self.sampler, rng)
        batch = rollout_batch(x_t, controls, self.env)
        value, d_cs = self.terminal_costs(batch, safe_set, value_fn)

        tol = self.penalty.terminal_tolerance
        if self.optimizer == 'mppi':
            candidates = evaluate_candidates(x_t, batch, value, d_cs, lambdas, self.env, safe_set, value_fn,
                                             self.mppi.temperature, self.mppi.weight_floor,
                                             self.k_neighbors, self.hull_max_iter, tol)
        else:
            sequences = self._cem_sequences(x_t, batch, value, d_cs, lambdas, safe_set, value_fn,
                                            rng_cem if rng_cem is not None else rng)
            candidates = evaluate_control_candidates(x_t, sequences, lambdas, self.env, safe_set, value_fn,
                                                     self.k_neighbors, self.hull_max_iter, tol)
        n_sampled = len(candidates)
        if self.backup is not None:
            backups = np.repeat(self.backup[None], len(lambdas), axis=0)
            candidates = candidates + evaluate_control_candidates(x_t, backups, lambdas, self.env, safe_set,
                                                                  value_fn, self.k_neighbors,
                                                                  self.hull_max_iter, tol)

        index = selected_index(candidates)
        chosen = candidates[index]
        self.mean = warm_start_shift(chosen.control)
        if self.use_backup:
            self.backup = self._next_backup(chosen, safe_set)
        diagnostics = StepDiagnostics(
            lambda_x=chosen.lam[0],
            lambda_cs=chosen.lam[1],
            feasible_count=sum(1 for c in candidates if c.feasible),
            min_violation=float(min(c.violation for c in candidates)),
            backup=index >= n_sampled,
        )
        logger.debug(f"step: lambda=({chosen.lam[0]:.3g}, {chosen.lam[1]:.3g}) "
                     f"feasible={diagnostics.feasible_count}/{len(candidates)} backup={diagnostics.backup}")
        return StepResult(chosen.control[0].copy(), chosen.control, chosen.lam, chosen.nominal, candidates, diagnostics)

    def _next_backup(self, chosen: PenaltyCandidate, safe_set: SafeSet) -> Optional[np.ndarray]:
        if safe_set.n_u == 0 or len(safe_set) == 0:
            return None
        terminal = chosen.nominal[-1]
        if not np.all(np.isfinite(terminal)) or np.any(self.env.in_target(chosen.nominal)):
            return warm_start_shift(chosen.control)
        idx, weights = hull_weights(self.env.features(terminal[None, :])[0], safe_set,
                                    self.k_neighbors, self.hull_max_iter)
        extension = np.clip(weights @ safe_set.inputs[idx], self.sampler.u_lo, self.sampler.u_hi)
        return np.vstack([chosen.control[1:], extension[None, :]])

    def _cem_sequences(self, x_t, batch, value, d_cs, lambdas, safe_set, value_fn, rng) -> np.ndarray:
        totals = assemble_costs(batch, value, d_cs, lambdas)
        sequences = []
        for p, lam in enumerate(lambdas):
            def resample(mean, std, lam=lam):
                ctrl = sample_truncated_normal_sequences(mean, self.sampler, rng, std=std)
                b = rollout_batch(x_t, ctrl, self.env)
                v, c = self.terminal_costs(b, safe_set, value_fn)
                return assemble_costs(b, v, c, lam), ctrl
            sequences.append(cem_update(totals[p], batch.controls, self.cem.elite_fraction,
                                        self.cem.iterations, resample, self.cem.min_std))
        return np.stack(sequences)
