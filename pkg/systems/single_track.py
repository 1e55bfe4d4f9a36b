"""
Dynamic single-track vehicle model (CommonRoad ST) with a kinematic fallback
at low speed, integrated with fixed-step RK4.

The kinematic model alone is used below ``v_kinematic`` (1 m/s) and the
dynamic model alone above ``v_dynamic`` (3 m/s). Between the two the yaw and
slip derivatives are blended linearly in speed, so the right-hand side stays
continuous across the switch.

State x = [p_x, p_y, v, delta, psi, psi_dot, beta]
Input u = [a, delta_dot]
"""
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from systems.point_mass import PlantModel

GRAVITY = 9.81
PLANNING_DT = 0.05
MAX_SUBSTEP = 0.02


@dataclass(frozen=True)
class VehicleParameters:
    """CommonRoad single-track parameters (SI units)."""
    m: float
    I_z: float
    l_f: float
    l_r: float
    h_s: float
    C_Sf: float
    C_Sr: float
    mu: float
    steering_min: float
    steering_max: float
    steering_rate_min: float
    steering_rate_max: float
    v_min: float
    v_max: float
    v_switch: float
    a_max: float
    # Below v_kinematic the kinematic model is used; above v_dynamic the
    # dynamic one; linear blend in between.
    v_kinematic: float = 1.0
    v_dynamic: float = 3.0

    @property
    def wheelbase(self) -> float:
        return self.l_f + self.l_r

    @classmethod
    def from_dict(cls, data: dict) -> 'VehicleParameters':
        steering = data['steering']
        longitudinal = data['longitudinal']
        return cls(
            m=float(data['m']),
            I_z=float(data['I_z']),
            l_f=float(data['l_f']),
            l_r=float(data['l_r']),
            h_s=float(data['h_s']),
            C_Sf=float(data['tire']['C_Sf']),
            C_Sr=float(data['tire']['C_Sr']),
            mu=float(data['tire']['mu']),
            steering_min=float(steering['min']),
            steering_max=float(steering['max']),
            steering_rate_min=float(steering['v_min']),
            steering_rate_max=float(steering['v_max']),
            v_min=float(longitudinal['v_min']),
            v_max=float(longitudinal['v_max']),
            v_switch=float(longitudinal['v_switch']),
            a_max=float(longitudinal['a_max']),
            v_kinematic=float(data.get('v_kinematic', 1.0)),
            v_dynamic=float(data.get('v_dynamic', 3.0)),
        )

    def to_dict(self) -> dict:
        return asdict(self)


def load_vehicle_parameters(path: Union[str, Path]) -> VehicleParameters:
    with open(path, 'r') as f:
        return VehicleParameters.from_dict(json.load(f))


def _steering_constraint(delta, delta_dot, p: VehicleParameters):
    at_limit = ((delta <= p.steering_min) & (delta_dot <= 0)) | ((delta >= p.steering_max) & (delta_dot >= 0))
    return np.where(at_limit, 0.0, np.clip(delta_dot, p.steering_rate_min, p.steering_rate_max))


def _acceleration_constraint(v, a, p: VehicleParameters):
    # Above v_switch the engine can no longer spin the wheels
    safe_v = np.maximum(v, p.v_switch)
    pos_limit = np.where(v > p.v_switch, p.a_max * p.v_switch / safe_v, p.a_max)
    at_limit = ((v <= p.v_min) & (a <= 0)) | ((v >= p.v_max) & (a >= 0))
    return np.where(at_limit, 0.0, np.clip(a, -p.a_max, pos_limit))


def single_track_derivative(x: np.ndarray, u: np.ndarray, p: VehicleParameters) -> np.ndarray:
    """Right-hand side of the single-track ODE on batched arrays (..., 7), (..., 2)."""
    v, delta, psi, psi_dot, beta = x[..., 2], x[..., 3], x[..., 4], x[..., 5], x[..., 6]
    a = _acceleration_constraint(v, u[..., 0], p)
    delta_dot = _steering_constraint(delta, u[..., 1], p)
    lf, lr, h, g = p.l_f, p.l_r, p.h_s, GRAVITY
    lwb = p.wheelbase

    # Dynamic model, evaluated on a speed bounded away from zero
    sign = np.where(v < 0, -1.0, 1.0)
    vd = np.where(np.abs(v) < p.v_kinematic, sign * p.v_kinematic, v)
    front = p.C_Sf * (g * lr - a * h)
    rear = p.C_Sr * (g * lf + a * h)
    k = p.mu * p.m / (p.I_z * lwb)
    dd_psi_dyn = (-k / vd * (lf ** 2 * front + lr ** 2 * rear) * psi_dot
                  + k * (lr * rear - lf * front) * beta
                  + k * lf * front * delta)
    d_beta_dyn = ((p.mu / (vd ** 2 * lwb) * (rear * lr - front * lf) - 1.0) * psi_dot
                  - p.mu / (vd * lwb) * (rear + front) * beta
                  + p.mu / (vd * lwb) * front * delta)

    # Kinematic model about the centre of gravity
    tan_d = np.tan(delta)
    cos_d = np.cos(delta)
    d_beta_kin = (lr * delta_dot) / (lwb * cos_d ** 2 * (1.0 + (tan_d ** 2 * lr / lwb) ** 2))
    dd_psi_kin = (a * np.cos(beta) * tan_d
                  - v * np.sin(beta) * d_beta_kin * tan_d
                  + v * np.cos(beta) * delta_dot / cos_d ** 2) / lwb
    d_psi_kin = v * np.cos(beta) * tan_d / lwb

    span = max(p.v_dynamic - p.v_kinematic, 1e-9)
    blend = np.clip((np.abs(v) - p.v_kinematic) / span, 0.0, 1.0)
    d_psi = blend * psi_dot + (1.0 - blend) * d_psi_kin
    dd_psi = blend * dd_psi_dyn + (1.0 - blend) * dd_psi_kin
    d_beta = blend * d_beta_dyn + (1.0 - blend) * d_beta_kin

    return np.stack([
        v * np.cos(beta + psi),
        v * np.sin(beta + psi),
        a,
        delta_dot,
        d_psi,
        dd_psi,
        d_beta,
    ], axis=-1)


def rk4(x: np.ndarray, u: np.ndarray, dt: float, p: VehicleParameters,
        max_substep: float = MAX_SUBSTEP) -> np.ndarray:
    """Integrate over dt with zero-order-hold input in equal RK4 substeps of at most max_substep."""
    n_sub = max(1, int(math.ceil(dt / max_substep - 1e-9)))
    h = dt / n_sub
    for _ in range(n_sub):
        k1 = single_track_derivative(x, u, p)
        k2 = single_track_derivative(x + 0.5 * h * k1, u, p)
        k3 = single_track_derivative(x + 0.5 * h * k2, u, p)
        k4 = single_track_derivative(x + h * k3, u, p)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def single_track_plant(params: VehicleParameters, dt: float = PLANNING_DT,
                       max_substep: float = MAX_SUBSTEP) -> PlantModel:
    return PlantModel(
        name='single_track',
        n_x=7,
        n_u=2,
        dt=dt,
        u_lo=np.array([-params.a_max, params.steering_rate_min]),
        u_hi=np.array([params.a_max, params.steering_rate_max]),
        dynamics=lambda x, u: rk4(np.asarray(x, dtype=float), np.asarray(u, dtype=float), dt, params, max_substep),
    )


def single_track_step(x: np.ndarray, u: np.ndarray, params: VehicleParameters,
                      w: Optional[np.ndarray] = None, dt: float = PLANNING_DT) -> np.ndarray:
    """Single validated vehicle step; see ``PlantModel.step``."""
    return single_track_plant(params, dt).step(x, u, w)
