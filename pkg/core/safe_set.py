"""
Sampled safe set: every state visited by a feasible iteration, annotated with
its realized cost-to-go, plus a nearest-neighbour index for hull queries.

A SafeSet is an immutable value. ``update_safe_set`` returns a new instance and
leaves its argument untouched, so the solver can share one safe set across any
number of concurrent evaluations during an episode.
"""
import json
from pathlib import Path
from typing import Callable, Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from core.errors import CheckpointError, EmptySafeSetError, InfeasibleRecordError, TrajectoryError
from core.types import IterationRecord, SafeSetEntry, StageCostFn, Trajectory
from utils.files import atomic_write_text

SAFE_SET_VERSION = 1

# Extra tree candidates fetched per query before falling back to a ball search
_TIE_SLACK = 8


def cost_to_go(trajectory: Trajectory, stage_cost: StageCostFn) -> List[float]:
    """
    Per-state suffix sums of the stage cost.
    
    The episode ends on target entry and the stage cost vanishes on the target,
    so the finite suffix sum equals the infinite-horizon cost-to-go.
    
    Args:
        trajectory: Closed-loop trajectory ending in the target set
        stage_cost: Vectorized h(x, u)
    
    Returns:
        One nonnegative value per state; the last one is 0
    
    Raises:
        TrajectoryError: If the final state still incurs stage cost
    """
    states, inputs = trajectory.states, trajectory.inputs
    n_u = inputs.shape[1] if inputs.shape[1] else 1
    final_cost = float(np.asarray(stage_cost(states[-1:], np.zeros((1, n_u))))[0])
    if final_cost != 0.0:
        raise TrajectoryError("trajectory does not reach target")
    if len(inputs) == 0:
        return [0.0]
    h = np.asarray(stage_cost(states[:-1], inputs), dtype=float)
    suffix = np.concatenate([np.cumsum(h[::-1])[::-1], [0.0]])
    return [float(c) for c in suffix]


class Dataset(NamedTuple):
    """(state, cost-to-go) pairs collected from feasible iterations."""
    states: np.ndarray
    costs: np.ndarray

    def __len__(self) -> int:
        return len(self.costs)

    def pairs(self) -> Iterator[Tuple[np.ndarray, float]]:
        for x, c in zip(self.states, self.costs):
            yield x, float(c)


class SafeSet:
    """
    Columnar, immutable store of safe-set entries.

    ``inputs`` holds the input applied at each stored state (zeros at the final
    state of an iteration). It may have zero columns when only states are known.
    """

    def __init__(self, states: np.ndarray, cost_to_go: np.ndarray,
                 iterations: np.ndarray, times: np.ndarray,
                 feasible_iterations: Sequence[int], normalize: bool = True,
                 inputs: Optional[np.ndarray] = None):
        states = np.array(states, dtype=float, ndmin=2)
        self.n_x = states.shape[1]
        self.states = states
        self.cost_to_go = np.array(cost_to_go, dtype=float).reshape(-1)
        self.iterations = np.array(iterations, dtype=int).reshape(-1)
        self.times = np.array(times, dtype=int).reshape(-1)
        self.feasible_iterations = frozenset(int(i) for i in feasible_iterations)
        self.normalize = bool(normalize)
        inputs = np.zeros((len(states), 0)) if inputs is None else np.array(inputs, dtype=float)
        if inputs.ndim != 2:
            inputs = inputs.reshape(len(inputs), -1) if inputs.size else np.zeros((len(inputs), 0))
        self.inputs = inputs
        if not (len(self.states) == len(self.cost_to_go) == len(self.iterations) == len(self.times)
                == len(self.inputs)):
            raise ValueError("safe set columns have different lengths")
        if np.any(self.cost_to_go < 0):
            raise ValueError("cost-to-go annotations must be nonnegative")
        unknown = set(self.iterations.tolist()) - self.feasible_iterations
        if unknown:
            raise ValueError(f"entries reference non-feasible iterations {sorted(unknown)}")
        for arr in (self.states, self.cost_to_go, self.iterations, self.times, self.inputs):
            arr.setflags(write=False)
        self._tree: Optional[cKDTree] = None
        self._scale: Optional[np.ndarray] = None
        self._stored: Optional[np.ndarray] = None

    @classmethod
    def empty(cls, n_x: int, normalize: bool = True) -> 'SafeSet':
        return cls(np.zeros((0, n_x)), [], [], [], [], normalize=normalize)

    def __len__(self) -> int:
        return len(self.cost_to_go)

    @property
    def n_u(self) -> int:
        return self.inputs.shape[1]

    @property
    def entries(self) -> List[SafeSetEntry]:
        return [SafeSetEntry(self.states[i].copy(), float(self.cost_to_go[i]),
                             int(self.iterations[i]), int(self.times[i]))
                for i in range(len(self))]

    # ============ NEIGHBOUR QUERIES ============

    @property
    def scale(self) -> np.ndarray:
        """Per-coordinate scale of the hull metric (std of stored states, or ones)."""
        if self._scale is None:
            if self.normalize and len(self) > 1:
                std = self.states.std(axis=0)
                self._scale = np.where(std > 1e-12, std, 1.0)
            else:
                self._scale = np.ones(self.n_x)
        return self._scale

    def normalized(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) / self.scale

    def _index(self) -> cKDTree:
        if self._tree is None:
            self._stored = self.normalized(self.states)
            self._tree = cKDTree(self._stored)
        return self._tree

    def neighbors(self, points: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        k nearest stored states (in the normalized metric) of each query point.
        
        Ties in distance resolve to the lowest entry index, including ties that
        straddle the k-th neighbour.
        
        Args:
            points: (B, n_x) query points
            k: Neighbour count, capped at the safe-set size
        
        Returns:
            (indices (B, k), normalized neighbour states (B, k, n_x),
             normalized query points (B, n_x))
        """
        if len(self) == 0:
            raise EmptySafeSetError("safe set is empty")
        if k < 1:
            raise ValueError("k_neighbors must be >= 1")
        points = np.array(points, dtype=float, ndmin=2)
        n = len(self)
        k = min(int(k), n)
        m = min(k + _TIE_SLACK, n)
        query = self.normalized(points)
        tree = self._index()
        _, idx = tree.query(query, k=m)
        idx = np.asarray(idx, dtype=int).reshape(len(points), m)
        dist = np.linalg.norm(self._stored[idx] - query[:, None, :], axis=-1)
        order = np.lexsort((idx, dist), axis=-1)
        idx = np.take_along_axis(idx, order, axis=1)
        dist = np.take_along_axis(dist, order, axis=1)
        if m < n:
            # Equal distances run past the candidates the tree returned
            for b in np.flatnonzero(dist[:, m - 1] <= dist[:, k - 1]):
                radius = dist[b, k - 1] * (1.0 + 1e-9) + 1e-12
                ball = np.asarray(tree.query_ball_point(query[b], radius), dtype=int)
                d = np.linalg.norm(self._stored[ball] - query[b], axis=1)
                idx[b, :k] = ball[np.lexsort((ball, d))][:k]
        idx = idx[:, :k]
        return idx, self._stored[idx], query

    def continuation(self, point: np.ndarray, horizon: int) -> Optional[np.ndarray]:
        """
        Stored inputs that followed the entry nearest to ``point``.
        
        Ties go to the lower cost-to-go, then to the lower entry index. Past the
        end of that entry's iteration the sequence is padded with zeros.
        
        Returns:
            (horizon, n_u) inputs, or None when the safe set holds no inputs
        """
        if self.n_u == 0 or len(self) == 0:
            return None
        self._index()
        query = self.normalized(np.asarray(point, dtype=float).reshape(-1))
        dist = np.linalg.norm(self._stored - query, axis=1)
        start = int(np.lexsort((np.arange(len(self)), self.cost_to_go, dist))[0])
        rows = np.flatnonzero((self.iterations == self.iterations[start]) & (self.times >= self.times[start]))
        rows = rows[np.argsort(self.times[rows], kind='stable')][:horizon]
        sequence = np.zeros((horizon, self.n_u))
        sequence[:len(rows)] = self.inputs[rows]
        return sequence


def _with_width(inputs: np.ndarray, n_u: int) -> np.ndarray:
    out = np.zeros((len(inputs), n_u))
    out[:, :inputs.shape[1]] = inputs
    return out


def update_safe_set(safe_set: SafeSet,
                    records: Union[IterationRecord, Sequence[IterationRecord]],
                    stage_cost: StageCostFn,
                    features: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> SafeSet:
    """
    Append every state of feasible records with cost-to-go annotations.
    
    Args:
        safe_set: Current safe set (not modified)
        records: One record or a list of records, all feasible
        stage_cost: h(x, u) used for the cost-to-go annotation
        features: Map from environment state to stored state (identity if None)
    
    Returns:
        New safe set containing the old entries followed by the new ones
    
    Raises:
        InfeasibleRecordError: If any record is infeasible (nothing is added)
    """
    if isinstance(records, IterationRecord):
        records = [records]
    records = list(records)
    for record in records:
        if not record.feasible:
            raise InfeasibleRecordError(f"iteration {record.iteration} is infeasible")
    if not records:
        return safe_set

    n_u = max([safe_set.n_u] + [record.trajectory.inputs.shape[1] for record in records])
    states = [safe_set.states]
    inputs = [_with_width(safe_set.inputs, n_u)]
    costs = [safe_set.cost_to_go]
    iterations = [safe_set.iterations]
    times = [safe_set.times]
    feasible = set(safe_set.feasible_iterations)
    for record in records:
        ctg = cost_to_go(record.trajectory, stage_cost)
        x = record.trajectory.states
        stored = features(x) if features is not None else x
        states.append(np.asarray(stored, dtype=float).reshape(len(x), -1))
        inputs.append(np.vstack([_with_width(record.trajectory.inputs, n_u), np.zeros((1, n_u))]))
        costs.append(np.asarray(ctg))
        iterations.append(np.full(len(x), record.iteration))
        times.append(np.arange(len(x)))
        feasible.add(record.iteration)
    if len(safe_set) == 0:
        states = states[1:]
    return SafeSet(np.concatenate(states), np.concatenate(costs),
                   np.concatenate(iterations), np.concatenate(times),
                   feasible, normalize=safe_set.normalize, inputs=np.concatenate(inputs))


def build_dataset(safe_set: SafeSet) -> Dataset:
    """One (state, cost-to-go) pair per safe-set entry."""
    if len(safe_set) == 0:
        raise EmptySafeSetError("safe set is empty")
    return Dataset(safe_set.states.copy(), safe_set.cost_to_go.copy())


# ============ PERSISTENCE ============

def safe_set_to_dict(safe_set: SafeSet) -> dict:
    return {
        'version': SAFE_SET_VERSION,
        'n_x': safe_set.n_x,
        'n_u': safe_set.n_u,
        'normalize': safe_set.normalize,
        'entries': [
            {'state': safe_set.states[i].tolist(),
             'input': safe_set.inputs[i].tolist(),
             'cost_to_go': float(safe_set.cost_to_go[i]),
             'iteration': int(safe_set.iterations[i]),
             'time': int(safe_set.times[i])}
            for i in range(len(safe_set))
        ],
        'feasible_iterations': sorted(safe_set.feasible_iterations),
    }


def safe_set_from_dict(data: dict) -> SafeSet:
    if data.get('version') != SAFE_SET_VERSION:
        raise CheckpointError(f"unsupported safe set version {data.get('version')!r}")
    n_x = int(data['n_x'])
    n_u = int(data.get('n_u', 0))
    entries = data['entries']
    states = np.array([e['state'] for e in entries], dtype=float).reshape(len(entries), n_x)
    inputs = np.array([e.get('input', []) for e in entries], dtype=float).reshape(len(entries), n_u)
    return SafeSet(states,
                   [e['cost_to_go'] for e in entries],
                   [e['iteration'] for e in entries],
                   [e['time'] for e in entries],
                   data['feasible_iterations'],
                   normalize=data.get('normalize', True),
                   inputs=inputs)


def save_safe_set(safe_set: SafeSet, path: Union[str, Path]) -> None:
    atomic_write_text(path, json.dumps(safe_set_to_dict(safe_set)))


def load_safe_set(path: Union[str, Path]) -> SafeSet:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"safe set file {path} not found")
    try:
        with open(path, 'r') as f:
            return safe_set_from_dict(json.load(f))
    except CheckpointError:
        raise
    except (ValueError, KeyError, TypeError) as e:
        raise CheckpointError(f"corrupt safe set file {path}: {e}") from e
