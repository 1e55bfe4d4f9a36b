"""
Task environments: plant + disturbances + admissible set, target set, stage
cost and the feature map used by the safe set and value function.

Every evaluator works on arrays with arbitrary leading batch axes so the
rollout engine can call them on whole sample batches.
"""
from typing import Optional, Sequence

import numpy as np

from systems.disturbance import DisturbanceModel
from systems.point_mass import POINT_MASS_DT, PlantModel, point_mass_plant
from systems.single_track import (MAX_SUBSTEP, PLANNING_DT, VehicleParameters, load_vehicle_parameters,
                                   single_track_plant)
from systems.track import TrackGeometry, wrap_angle


class Environment:
    """Base class; subclasses fill in the set definitions."""

    name = 'environment'

    def __init__(self, plant: PlantModel, disturbance: DisturbanceModel,
                 initial_state: np.ndarray, n_x: int):
        self.plant = plant
        self.disturbance = disturbance
        self.n_x = n_x
        self.initial_state = np.asarray(initial_state, dtype=float).reshape(n_x)

    @property
    def n_u(self) -> int:
        return self.plant.n_u

    @property
    def dt(self) -> float:
        return self.plant.dt

    @property
    def u_lo(self) -> np.ndarray:
        return self.plant.u_lo

    @property
    def u_hi(self) -> np.ndarray:
        return self.plant.u_hi

    @property
    def n_features(self) -> int:
        return self.n_x

    # ============ SETS AND COSTS ============

    def admissible_distance(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def in_target(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def in_admissible(self, x: np.ndarray) -> np.ndarray:
        return self.admissible_distance(x) == 0.0

    def stage_cost(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Minimum-time cost: 1 per step outside the target, 0 inside."""
        return np.where(self.in_target(x), 0.0, 1.0)

    def features(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float)

    def cost_seconds(self, cost: float) -> float:
        return float(cost) * self.dt

    # ============ DYNAMICS ============

    def step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Noise-free batched step of the environment state."""
        return self.plant.step_batch(x, u)

    def apply(self, x: np.ndarray, u: np.ndarray, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        """
        Advance the true system one step with actuation noise.
        
        Raises:
            InputBoundsError: If u is outside the input box
            DynamicsDivergedError: If the plant produced a non-finite state
        """
        w = self.disturbance.sample_actuation(rng) if rng is not None else None
        return self.plant.step(x, u, w)

    def observe(self, x: np.ndarray, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        """State reported to the controller (plant coordinates perturbed)."""
        if rng is None:
            return np.array(x, dtype=float)
        return np.asarray(x, dtype=float) + self.disturbance.sample_observation(rng)


class PointMassEnvironment(Environment):
    """
    Point mass driving from the origin around a circular obstacle to a goal.
    
    The target is an epsilon-ball around the goal state: position within
    ``target_position_tol`` and speed within ``target_velocity_tol``.
    """

    name = 'point_mass'

    def __init__(self, obstacle_center: Sequence[float] = (30.0, 0.0), obstacle_radius: float = 10.0,
                 target: Sequence[float] = (60.0, 0.0, 0.0, 0.0),
                 target_position_tol: float = 1.0, target_velocity_tol: float = 0.5,
                 initial_state: Sequence[float] = (0.0, 0.0, 0.0, 0.0),
                 dt: float = POINT_MASS_DT, a_max: float = 1.0,
                 disturbance: Optional[DisturbanceModel] = None):
        plant = point_mass_plant(dt, a_max)
        super().__init__(plant, disturbance or DisturbanceModel.noise_free(4, 2), np.asarray(initial_state), 4)
        self.obstacle_center = np.asarray(obstacle_center, dtype=float)
        self.obstacle_radius = float(obstacle_radius)
        self.target = np.asarray(target, dtype=float)
        self.target_position_tol = float(target_position_tol)
        self.target_velocity_tol = float(target_velocity_tol)

    def admissible_distance(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        dist = np.linalg.norm(x[..., :2] - self.obstacle_center, axis=-1)
        return np.maximum(0.0, self.obstacle_radius - dist)

    def in_target(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        pos_err = np.linalg.norm(x[..., :2] - self.target[:2], axis=-1)
        vel_err = np.linalg.norm(x[..., 2:4] - self.target[2:4], axis=-1)
        return (pos_err <= self.target_position_tol) & (vel_err <= self.target_velocity_tol)


class RacingEnvironment(Environment):
    """
    Single-track vehicle completing one lap of a closed track.
    
    State is the plant state [p_x, p_y, v, delta, psi, psi_dot, beta] followed
    by the unwrapped progress s. The lap is complete once s reaches the track
    length. Features are [s, e_y, e_psi, v, delta, psi_dot, beta].
    """

    name = 'racing'

    def __init__(self, track: TrackGeometry, vehicle: VehicleParameters, v0: float = 3.0,
                 dt: float = PLANNING_DT, max_substep: float = MAX_SUBSTEP,
                 disturbance: Optional[DisturbanceModel] = None):
        plant = single_track_plant(vehicle, dt, max_substep)
        p0 = track.position(0.0)
        x0 = np.array([p0[0], p0[1], v0, 0.0, float(track.heading(0.0)), 0.0, 0.0, 0.0])
        super().__init__(plant, disturbance or DisturbanceModel.noise_free(7, 2), x0, 8)
        self.track = track
        self.vehicle = vehicle

    @property
    def n_features(self) -> int:
        return 7

    def _progress(self, plant_state: np.ndarray, s_prev: np.ndarray) -> np.ndarray:
        with np.errstate(invalid='ignore', over='ignore'):
            s_wrapped, _, _ = self.track.project(plant_state[..., :2], s_hint=s_prev)
            return self.track.unwrap(s_wrapped, s_prev)

    def frenet(self, x: np.ndarray):
        """(s, e_y, e_psi) with s unwrapped."""
        x = np.asarray(x, dtype=float)
        with np.errstate(invalid='ignore', over='ignore'):
            s_wrapped, e_y, _ = self.track.project(x[..., :2], s_hint=x[..., 7])
            e_psi = wrap_angle(x[..., 4] - self.track.heading(s_wrapped))
        return x[..., 7], e_y, e_psi

    def admissible_distance(self, x: np.ndarray) -> np.ndarray:
        _, e_y, _ = self.frenet(x)
        return np.maximum(0.0, np.abs(e_y) - self.track.half_width)

    def in_target(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float)[..., 7] >= self.track.length

    def features(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        s, e_y, e_psi = self.frenet(x)
        return np.stack([s, e_y, e_psi, x[..., 2], x[..., 3], x[..., 5], x[..., 6]], axis=-1)

    def step(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        xp = self.plant.step_batch(x[..., :7], u)
        s = self._progress(xp, x[..., 7])
        return np.concatenate([xp, s[..., None]], axis=-1)

    def apply(self, x: np.ndarray, u: np.ndarray, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        xp = super().apply(x[:7], u, rng)
        return np.concatenate([xp, [float(self._progress(xp, x[7]))]])

    def observe(self, x: np.ndarray, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if rng is None:
            return x.copy()
        xp = x[:7] + self.disturbance.sample_observation(rng)
        return np.concatenate([xp, [float(self._progress(xp, x[7]))]])


def make_environment(settings) -> Environment:
    """Build the environment named by an ``EnvironmentSettings``."""
    disturbance = DisturbanceModel.from_scales(settings.observation_std, settings.actuation_std,
                                               settings.noise_truncation)
    if settings.kind == 'point_mass':
        return PointMassEnvironment(
            obstacle_center=settings.obstacle_center,
            obstacle_radius=settings.obstacle_radius,
            target=settings.target,
            target_position_tol=settings.target_position_tol,
            target_velocity_tol=settings.target_velocity_tol,
            initial_state=settings.initial_state,
            dt=settings.dt,
            disturbance=disturbance,
        )
    if settings.kind == 'racing':
        track = TrackGeometry.from_csv(settings.track_file, closed=settings.track_closed)
        vehicle = load_vehicle_parameters(settings.vehicle_file)
        return RacingEnvironment(track, vehicle, v0=settings.v0, dt=settings.dt,
                                 max_substep=settings.max_substep, disturbance=disturbance)
    raise ValueError(f"unknown environment {settings.kind!r}")
