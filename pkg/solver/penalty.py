"""
Adaptive penalty selection.

Every sampled penalty pair produces its own averaged control from the shared
rollout batch. The averaged control is replayed noise-free and checked against
the admissible set and the safe-set hull. The selected pair is the cheapest
feasible one, or the least-violating one when none is feasible.
"""
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from core.hull import DEFAULT_K_NEIGHBORS, DEFAULT_MAX_ITER, hull_distance
from core.safe_set import SafeSet
from solver.mppi import assemble_costs, importance_weights, weighted_control_average
from solver.sampling import RolloutBatch, rollout_batch
from systems.environments import Environment

TERMINAL_TOLERANCE = 1e-6

ValueFn = Callable[[np.ndarray], np.ndarray]


@dataclass
class PenaltyCandidate:
    lam: Tuple[float, float]
    control: np.ndarray
    nominal: np.ndarray
    feasible: bool
    sampled_cost: float
    violation: float


def _nominal_checks(x_t: np.ndarray, controls: np.ndarray, lambdas: np.ndarray, env: Environment,
                    safe_set: SafeSet, value_fn: ValueFn, k_neighbors: int, max_iter: int,
                    tolerance: float) -> List[PenaltyCandidate]:
    nominal = rollout_batch(x_t, controls, env)
    terminal = nominal.terminal_states
    open_rows = ~(nominal.absorbed | nominal.diverged)
    features = env.features(terminal)

    d_cs = np.zeros(len(controls))
    value = np.zeros(len(controls))
    for i in np.flatnonzero(open_rows):
        d_cs[i] = hull_distance(features[i], safe_set, k_neighbors, max_iter)
    if np.any(open_rows):
        value[open_rows] = value_fn(features[open_rows])

    candidates = []
    for i, lam in enumerate(lambdas):
        running = nominal.d_sums[i] + nominal.d_terminal[i]
        terminal_ok = bool(nominal.absorbed[i]) or d_cs[i] <= tolerance
        feasible = bool(not nominal.diverged[i] and running == 0.0 and terminal_ok)
        cost = (nominal.h_sums[i] + value[i]
                + lam[0] * nominal.d_sums[i] + lam[1] * d_cs[i])
        violation = np.inf if nominal.diverged[i] else running + d_cs[i]
        candidates.append(PenaltyCandidate(
            lam=(float(lam[0]), float(lam[1])),
            control=controls[i],
            nominal=nominal.states[i],
            feasible=feasible,
            sampled_cost=float(cost),
            violation=float(violation),
        ))
    return candidates


def evaluate_candidates(x_t: np.ndarray, batch: RolloutBatch, terminal_value: np.ndarray,
                        terminal_hull_distance: np.ndarray, lambdas: Sequence[Sequence[float]],
                        env: Environment, safe_set: SafeSet, value_fn: ValueFn,
                        temperature: float, weight_floor: float = 0.0,
                        k_neighbors: int = DEFAULT_K_NEIGHBORS, max_iter: int = DEFAULT_MAX_ITER,
                        tolerance: float = TERMINAL_TOLERANCE) -> List[PenaltyCandidate]:
    """
    Solve the information-theoretic update once per penalty pair.
    
    Args:
        x_t: Current state
        batch: Shared rollout batch
        terminal_value: (N,) value estimates at the batch's terminal states
        terminal_hull_distance: (N,) hull distances of the batch's terminal states
        lambdas: (P, 2) penalty pairs
        env: Environment
        safe_set: Safe set from the previous iterations
        value_fn: Batched terminal value on feature vectors
        temperature: Importance-sampling temperature
    
    Returns:
        One candidate per pair, in input order
    
    Raises:
        NoFiniteSamplesError: If every sample has infinite cost
    """
    lambdas = np.array(lambdas, dtype=float, ndmin=2)
    if len(lambdas) == 0:
        raise ValueError("need at least one penalty pair")
    totals = assemble_costs(batch, terminal_value, terminal_hull_distance, lambdas)
    weights = importance_weights(totals, temperature, weight_floor)
    controls = weighted_control_average(batch.controls, weights)
    return _nominal_checks(x_t, controls, lambdas, env, safe_set, value_fn, k_neighbors, max_iter, tolerance)


def evaluate_control_candidates(x_t: np.ndarray, controls: np.ndarray, lambdas: Sequence[Sequence[float]],
                                env: Environment, safe_set: SafeSet, value_fn: ValueFn,
                                k_neighbors: int = DEFAULT_K_NEIGHBORS, max_iter: int = DEFAULT_MAX_ITER,
                                tolerance: float = TERMINAL_TOLERANCE) -> List[PenaltyCandidate]:
    """Feasibility and cost of externally optimized controls (one (T, n_u) sequence per pair)."""
    lambdas = np.array(lambdas, dtype=float, ndmin=2)
    controls = np.asarray(controls, dtype=float)
    return _nominal_checks(x_t, controls, lambdas, env, safe_set, value_fn, k_neighbors, max_iter, tolerance)


def select_lambda(candidates: Sequence[PenaltyCandidate]) -> Tuple[Tuple[float, float], np.ndarray]:
    """
    Cheapest feasible candidate, else the least-violating one.
    
    Ties resolve to the lowest candidate index.
    
    Returns:
        (selected penalty pair, its control sequence)
    """
    index = selected_index(candidates)
    return candidates[index].lam, candidates[index].control


def selected_index(candidates: Sequence[PenaltyCandidate]) -> int:
    if not candidates:
        raise ValueError("no candidates to select from")
    feasible = [i for i, c in enumerate(candidates) if c.feasible]
    if feasible:
        return min(feasible, key=lambda i: (candidates[i].sampled_cost, i))
    return min(range(len(candidates)), key=lambda i: (candidates[i].violation, i))


PENALTY_MODES = ('adaptive', 'fixed_high', 'fixed_low')
RESAMPLE_POLICIES = ('run', 'iteration', 'step')


@dataclass(frozen=True)
class PenaltySettings:
    """
    How the penalty pairs of a step are chosen.
    
    ``adaptive`` draws ``n_pairs`` pairs uniformly from the box; the fixed
    modes use a single pair. ``resample`` sets how often adaptive pairs are
    redrawn: once per run, once per iteration or at every step.
    """
    n_pairs: int = 8
    lambda_max_x: float = 1000.0
    lambda_max_cs: float = 1000.0
    mode: str = 'adaptive'
    fixed_low: Tuple[float, float] = (1.0, 1.0)
    resample: str = 'iteration'
    terminal_tolerance: float = TERMINAL_TOLERANCE
