"""
Domain types shared by all modules.

States and controls are plain float64 numpy arrays; the dataclasses below give
names to the composite records passed between the solver and the learning loop.
"""
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List

import numpy as np

# x -> real vector of the environment's dimension
StateVector = np.ndarray
# u -> real vector of the plant's input dimension
ControlVector = np.ndarray
# (T, n_u) array, T >= 1
ControlSequence = np.ndarray

StageCostFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def as_state(values, n_x: int) -> StateVector:
    """Validate and convert to a finite float vector of length n_x."""
    x = np.asarray(values, dtype=float).reshape(-1)
    if x.shape[0] != n_x:
        raise ValueError(f"state has dimension {x.shape[0]}, expected {n_x}")
    if not np.all(np.isfinite(x)):
        raise ValueError("state has non-finite entries")
    return x


@dataclass
class Trajectory:
    """Closed-loop trajectory: one more state than inputs."""
    states: np.ndarray
    inputs: np.ndarray

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.inputs = np.asarray(self.inputs, dtype=float)
        if self.states.ndim != 2:
            raise ValueError("states must be a (K+1, n_x) array")
        if self.inputs.ndim != 2:
            if self.inputs.size:
                raise ValueError("inputs must be a (K, n_u) array")
            self.inputs = self.inputs.reshape(0, 0)
        if len(self.states) != len(self.inputs) + 1:
            raise ValueError("trajectory must hold exactly one more state than inputs")

    def __len__(self) -> int:
        return len(self.inputs)


@dataclass(frozen=True)
class SafeSetEntry:
    state: StateVector
    cost_to_go: float
    iteration_index: int
    time_index: int


@dataclass
class StepDiagnostics:
    """Per-step record of the penalty selection."""
    lambda_x: float
    lambda_cs: float
    feasible_count: int
    min_violation: float
    # True when the safe-set backup sequence was selected
    backup: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            'lambda_x': self.lambda_x,
            'lambda_cs': self.lambda_cs,
            'feasible_count': self.feasible_count,
            'min_violation': self.min_violation,
            'backup': self.backup,
        }


@dataclass
class IterationRecord:
    """One closed-loop episode."""
    iteration: int
    trajectory: Trajectory
    feasible: bool
    iteration_cost: float
    violation_count: int
    wall_time: float
    termination: str = 'target'
    message: str = ''
    steps: List[StepDiagnostics] = field(default_factory=list)

    def __post_init__(self):
        if self.feasible and self.violation_count != 0:
            raise ValueError("a feasible record cannot have violations")

    @property
    def mean_lambda(self) -> tuple:
        if not self.steps:
            return (float('nan'), float('nan'))
        return (float(np.mean([s.lambda_x for s in self.steps])),
                float(np.mean([s.lambda_cs for s in self.steps])))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'iteration': self.iteration,
            'feasible': self.feasible,
            'iteration_cost': self.iteration_cost,
            'violation_count': self.violation_count,
            'wall_time': self.wall_time,
            'termination': self.termination,
            'message': self.message,
            'states': self.trajectory.states.tolist(),
            'inputs': self.trajectory.inputs.tolist(),
            'n_u': int(self.trajectory.inputs.shape[1]),
            'steps': [s.to_dict() for s in self.steps],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'IterationRecord':
        states = np.asarray(data['states'], dtype=float)
        inputs = np.asarray(data['inputs'], dtype=float).reshape(len(data['inputs']), int(data.get('n_u', 0)))
        return cls(
            iteration=int(data['iteration']),
            trajectory=Trajectory(states, inputs),
            feasible=bool(data['feasible']),
            iteration_cost=float(data['iteration_cost']),
            violation_count=int(data['violation_count']),
            wall_time=float(data['wall_time']),
            termination=data.get('termination', 'target'),
            message=data.get('message', ''),
            steps=[StepDiagnostics(**s) for s in data.get('steps', [])],
        )
