"""
Scripted demonstrations that seed the safe set.

Both controllers are deliberately slow: the only requirement on the first
episode is that it is feasible, and the learning loop improves from there.
"""
import time
from typing import Callable, List, Optional, Sequence

import numpy as np

from core.errors import BootstrapError, SitLmpcError
from core.safe_set import SafeSet, update_safe_set
from core.types import IterationRecord, Trajectory
from systems.environments import Environment, PointMassEnvironment, RacingEnvironment
from systems.track import wrap_angle
from utils.log import get_logger
from utils.rng import ACTUATION, OBSERVATION, stream

logger = get_logger('bootstrap')

DEMO_MAX_STEPS = 5000

# Point-mass detour over the obstacle, in obstacle radii relative to its centre
DETOUR_OFFSETS = ((-2.0, 1.3), (0.0, 1.6), (2.0, 1.3))
WAYPOINT_SPEED = 3.0
WAYPOINT_SWITCH_RADIUS = 2.0
ARRIVAL_GAIN = 0.5
VELOCITY_GAIN = 1.0

# Centerline tracker
LATERAL_GAIN = 0.3
HEADING_GAIN = 1.0
STEERING_GAIN = 4.0
SPEED_GAIN = 1.0
PREVIEW_TIME = 0.45

Policy = Callable[[np.ndarray], np.ndarray]


class WaypointFollower:
    """Velocity-command tracker through a list of waypoints, stopping at the last."""

    def __init__(self, waypoints: Sequence[Sequence[float]],
                 speed: float = WAYPOINT_SPEED, switch_radius: float = WAYPOINT_SWITCH_RADIUS,
                 arrival_gain: float = ARRIVAL_GAIN, velocity_gain: float = VELOCITY_GAIN,
                 a_max: float = 1.0):
        self.waypoints = np.asarray(waypoints, dtype=float)
        self.speed = speed
        self.switch_radius = switch_radius
        self.arrival_gain = arrival_gain
        self.velocity_gain = velocity_gain
        self.a_max = a_max
        self.index = 0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        last = len(self.waypoints) - 1
        while self.index < last and np.linalg.norm(self.waypoints[self.index] - x[:2]) < self.switch_radius:
            self.index += 1
        offset = self.waypoints[self.index] - x[:2]
        dist = float(np.linalg.norm(offset))
        speed = self.speed if self.index < last else min(self.speed, self.arrival_gain * dist)
        v_ref = offset / dist * speed if dist > 1e-9 else np.zeros(2)
        return np.clip(self.velocity_gain * (v_ref - x[2:4]), -self.a_max, self.a_max)


class CenterlineTracker:
    """
    Steering from previewed curvature feed-forward plus lateral and course
    feedback; longitudinal control is proportional on speed.
    """

    def __init__(self, env: RacingEnvironment, speed: float):
        self.env = env
        self.speed = speed
        self.wheelbase = env.vehicle.wheelbase

    def __call__(self, x: np.ndarray) -> np.ndarray:
        track = self.env.track
        s, e_y, e_psi = self.env.frenet(x)
        v, delta, beta = x[2], x[3], x[6]
        kappa = float(track.curvature(s + max(v, 0.0) * PREVIEW_TIME))
        course_error = float(wrap_angle(e_psi + beta))
        delta_ref = np.arctan(self.wheelbase * kappa) - LATERAL_GAIN * float(e_y) - HEADING_GAIN * course_error
        u = np.array([SPEED_GAIN * (self.speed - v), STEERING_GAIN * (delta_ref - delta)])
        return np.clip(u, self.env.u_lo, self.env.u_hi)


def _segment_distance(a: np.ndarray, b: np.ndarray, p: np.ndarray) -> float:
    ab = b - a
    t = float(np.clip(np.dot(p - a, ab) / max(float(np.dot(ab, ab)), 1e-12), 0.0, 1.0))
    return float(np.linalg.norm(a + t * ab - p))


def detour_waypoints(env: PointMassEnvironment) -> np.ndarray:
    """
    Straight to the target if the segment clears the obstacle with room for
    corner cutting, otherwise over the top of it.
    """
    start, goal = env.initial_state[:2], env.target[:2]
    center, radius = env.obstacle_center, env.obstacle_radius
    if _segment_distance(start, goal, center) > radius + 2.0 * WAYPOINT_SWITCH_RADIUS:
        return goal[None, :].copy()
    detour = [center + radius * np.asarray(offset) for offset in DETOUR_OFFSETS]
    return np.vstack(detour + [goal])


def demonstration_policy(env: Environment, bootstrap_speed: float = 4.0) -> Policy:
    if isinstance(env, PointMassEnvironment):
        return WaypointFollower(detour_waypoints(env), a_max=float(env.u_hi[0]))
    if isinstance(env, RacingEnvironment):
        return CenterlineTracker(env, bootstrap_speed)
    raise BootstrapError(f"no demonstration controller for {env.name}")


def demonstration(env: Environment, policy: Policy, seed: int = 0,
                  max_steps: int = DEMO_MAX_STEPS) -> IterationRecord:
    """
    Run the scripted policy from the initial state as iteration 0.

    The demonstration sees the same observation and actuation noise as the
    learning episodes.

    Raises:
        BootstrapError: If the episode leaves the admissible set or does not
            reach the target within ``max_steps``
    """
    started = time.perf_counter()
    x = env.initial_state.copy()
    states: List[np.ndarray] = [x]
    inputs: List[np.ndarray] = []
    reason: Optional[str] = None
    try:
        for t in range(max_steps):
            if env.in_target(x):
                break
            if not env.in_admissible(x):
                reason = f"left the admissible set at step {t}"
                break
            y = env.observe(x, stream(seed, OBSERVATION, 0, t))
            u = policy(y)
            x = env.apply(x, u, stream(seed, ACTUATION, 0, t))
            states.append(x)
            inputs.append(u)
        else:
            if not env.in_target(x):
                reason = f"target not reached within {max_steps} steps"
    except SitLmpcError as e:
        reason = str(e)
    if reason is None and not env.in_admissible(x):
        reason = "final state is not admissible"
    if reason is not None:
        raise BootstrapError(f"bootstrap failed: {reason}")

    trajectory = Trajectory(np.array(states), np.array(inputs).reshape(len(inputs), env.n_u))
    cost = float(np.sum(env.stage_cost(trajectory.states[:-1], trajectory.inputs))) if inputs else 0.0
    record = IterationRecord(iteration=0, trajectory=trajectory, feasible=True, iteration_cost=cost,
                             violation_count=0, wall_time=time.perf_counter() - started,
                             termination='target', message='demonstration')
    logger.info(f"Demonstration on {env.name}: {len(trajectory)} steps, cost {cost:g} "
                f"({env.cost_seconds(cost):.2f} s)")
    return record


def initial_safe_set(env: Environment, record: IterationRecord, normalize: bool = True) -> SafeSet:
    return update_safe_set(SafeSet.empty(env.n_features, normalize), record, env.stage_cost, env.features)


def bootstrap_safe_set(env: Environment, config, seed: int = 0) -> SafeSet:
    """
    Safe set of a single scripted demonstration.

    Args:
        env: Task environment
        config: ExperimentConfig (bootstrap speed, normalization)
        seed: Noise seed for the demonstration

    Raises:
        BootstrapError: If the demonstration is infeasible
    """
    policy = demonstration_policy(env, config.environment.bootstrap_speed)
    record = demonstration(env, policy, seed)
    return initial_safe_set(env, record, config.safe_set.normalize)
