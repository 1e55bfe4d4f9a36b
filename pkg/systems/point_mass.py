"""
Planar point mass (double integrator) with bounded accelerations.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from core.errors import DynamicsDivergedError, InputBoundsError

POINT_MASS_DT = 0.1
_BOUNDS_TOL = 1e-12

DynamicsFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PlantModel:
    """
    Discrete-time plant x+ = f(x, u, w) at a fixed timestep.
    
    ``dynamics`` is the noise-free map on batched arrays (..., n_x), (..., n_u);
    ``step`` adds actuation noise, validates inputs and checks finiteness.
    """
    name: str
    n_x: int
    n_u: int
    dt: float
    u_lo: np.ndarray
    u_hi: np.ndarray
    dynamics: DynamicsFn = field(repr=False)

    def __post_init__(self):
        lo = np.asarray(self.u_lo, dtype=float).reshape(self.n_u)
        hi = np.asarray(self.u_hi, dtype=float).reshape(self.n_u)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo <= hi)):
            raise ValueError("input bounds must be finite closed intervals")
        object.__setattr__(self, 'u_lo', lo)
        object.__setattr__(self, 'u_hi', hi)

    def check_input(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.n_u:
            raise InputBoundsError(f"input has dimension {u.shape[-1]}, expected {self.n_u}")
        if np.any(u < self.u_lo - _BOUNDS_TOL) or np.any(u > self.u_hi + _BOUNDS_TOL):
            raise InputBoundsError(f"input {u.tolist()} outside bounds [{self.u_lo.tolist()}, {self.u_hi.tolist()}]")
        return u

    def saturate(self, u: np.ndarray) -> np.ndarray:
        return np.clip(u, self.u_lo, self.u_hi)

    def step(self, x: np.ndarray, u: np.ndarray, w: Optional[np.ndarray] = None) -> np.ndarray:
        """
        One validated plant step.
        
        Args:
            x: State (n_x,) or batch (..., n_x)
            u: Commanded input, must lie within the input box
            w: Actuation noise added to u before saturation (None for noise-free)
        
        Raises:
            InputBoundsError: If u is outside the input box
            DynamicsDivergedError: If the next state is not finite
        """
        u = self.check_input(u)
        if w is not None:
            u = self.saturate(u + np.asarray(w, dtype=float))
        x_next = self.dynamics(np.asarray(x, dtype=float), u)
        if not np.all(np.isfinite(x_next)):
            raise DynamicsDivergedError("dynamics diverged")
        return x_next

    def step_batch(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Noise-free step without validation; non-finite rows are left to the caller."""
        return self.dynamics(x, u)


def point_mass_dynamics(x: np.ndarray, u: np.ndarray, dt: float = POINT_MASS_DT) -> np.ndarray:
    # Exact zero-order hold: p+ = p + v dt + a dt^2 / 2, v+ = v + a dt
    p, v = x[..., :2], x[..., 2:4]
    p_next = p + v * dt + 0.5 * u * dt * dt
    v_next = v + u * dt
    return np.concatenate([p_next, v_next], axis=-1)


def point_mass_plant(dt: float = POINT_MASS_DT, a_max: float = 1.0) -> PlantModel:
    """x = [p_x, p_y, v_x, v_y], u = [a_x, a_y] with |a| <= a_max per axis."""
    return PlantModel(
        name='point_mass',
        n_x=4,
        n_u=2,
        dt=dt,
        u_lo=np.full(2, -a_max),
        u_hi=np.full(2, a_max),
        dynamics=lambda x, u: point_mass_dynamics(x, u, dt),
    )


def point_mass_step(x: np.ndarray, u: np.ndarray, w: Optional[np.ndarray] = None,
                    dt: float = POINT_MASS_DT) -> np.ndarray:
    """Single point-mass step; see ``PlantModel.step``."""
    return point_mass_plant(dt).step(x, u, w)
