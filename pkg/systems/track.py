"""
Race-track centerline and the Frenet frame.

The centerline is a cubic spline through the CSV waypoints, re-parameterized
by arc length so that the spline parameter is the progress s. Projection finds
the closest centerline point by a grid search followed by Newton refinement.
Lateral offset e_y is positive to the left of the travel direction.
"""
import csv
import math
from pathlib import Path
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

from core.errors import OffTrackError
from utils.log import get_logger

logger = get_logger('track')

_RESAMPLE_STEP = 0.05
_GRID_STEP = 0.25
_WINDOW = 3.0
_WINDOW_STEP = 0.1
_NEWTON_ITERS = 5


class FrenetPose(NamedTuple):
    s: float
    e_y: float
    e_psi: float


def wrap_angle(angle):
    """Wrap into (-pi, pi]."""
    wrapped = np.mod(np.asarray(angle, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped <= -np.pi, wrapped + 2.0 * np.pi, wrapped)


class TrackGeometry:
    """Arc-length parameterized centerline with a uniform half-width."""

    def __init__(self, x: np.ndarray, y: np.ndarray, half_width: float, closed: bool = True):
        pts = np.column_stack([np.asarray(x, dtype=float), np.asarray(y, dtype=float)])
        if closed and len(pts) > 2 and np.allclose(pts[0], pts[-1]):
            pts = pts[:-1]
        if len(pts) < 3:
            raise ValueError("track needs at least 3 waypoints")
        if half_width <= 0:
            raise ValueError("track half-width must be positive")
        self.closed = bool(closed)
        self.half_width = float(half_width)
        self.waypoints = pts

        if closed:
            pts = np.vstack([pts, pts[:1]])
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(seg <= 0):
            raise ValueError("consecutive waypoints must be distinct")
        chord = np.concatenate([[0.0], np.cumsum(seg)])
        bc = 'periodic' if closed else 'not-a-knot'
        rough = CubicSpline(chord, pts, bc_type=bc)

        n = max(int(math.ceil(chord[-1] / _RESAMPLE_STEP)), 8)
        t = np.linspace(0.0, chord[-1], n + 1)
        speed = np.linalg.norm(rough(t, 1), axis=1)
        s = cumulative_trapezoid(speed, t, initial=0.0)
        xy = rough(t)
        if closed:
            xy[-1] = xy[0]
        self._spline = CubicSpline(s, xy, bc_type=bc)
        self.length = float(s[-1])
        self.arc_length = s

        self._grid = np.arange(0.0, self.length, _GRID_STEP)
        self._grid_xy = self._spline(self._grid)
        curvature = self.curvature(self.arc_length)
        self.max_curvature = float(np.max(np.abs(curvature)))

    @classmethod
    def from_csv(cls, path: Union[str, Path], closed: bool = True) -> 'TrackGeometry':
        """Load columns x_m, y_m, w_left_m, w_right_m; the half-width is the smallest width given."""
        xs, ys, widths = [], [], []
        with open(path, 'r', newline='') as f:
            reader = csv.DictReader(line for line in f if not line.lstrip().startswith('#'))
            for row in reader:
                xs.append(float(row['x_m']))
                ys.append(float(row['y_m']))
                widths.append((float(row['w_left_m']), float(row['w_right_m'])))
        if not xs:
            raise ValueError(f"track file {path} has no waypoints")
        widths = np.asarray(widths)
        if not np.allclose(widths, widths[0, 0]):
            logger.warning(f"Track {path} has non-uniform width; using the minimum {widths.min():.3f} m")
        return cls(np.asarray(xs), np.asarray(ys), float(widths.min()), closed=closed)

    # ============ CENTERLINE ============

    def _param(self, s):
        s = np.asarray(s, dtype=float)
        if self.closed:
            return np.mod(s, self.length)
        return np.clip(s, 0.0, self.length)

    def position(self, s) -> np.ndarray:
        return self._spline(self._param(s))

    def tangent(self, s) -> np.ndarray:
        d = self._spline(self._param(s), 1)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def heading(self, s):
        d = self._spline(self._param(s), 1)
        return np.arctan2(d[..., 1], d[..., 0])

    def curvature(self, s):
        q = self._param(s)
        d1 = self._spline(q, 1)
        d2 = self._spline(q, 2)
        cross = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
        return cross / np.linalg.norm(d1, axis=-1) ** 3

    @property
    def min_turn_radius(self) -> float:
        return 1.0 / self.max_curvature if self.max_curvature > 0 else math.inf

    # ============ PROJECTION ============

    def project(self, points: np.ndarray, s_hint: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Closest centerline point of each query point.
        
        Args:
            points: (..., 2) positions
            s_hint: Optional (...) progress guess; restricts the search to a
                window around it
        
        Returns:
            (s, e_y, residual) each of shape (...). s is wrapped into
            [0, length) on closed tracks; residual is the tangential component
            of the offset, zero at a proper perpendicular foot.
        """
        points = np.asarray(points, dtype=float)
        lead = points.shape[:-1]
        p = points.reshape(-1, 2)

        if s_hint is None:
            d2 = np.sum((self._grid_xy[None, :, :] - p[:, None, :]) ** 2, axis=-1)
            s = self._grid[np.argmin(d2, axis=1)]
            step = _GRID_STEP
        else:
            hint = np.broadcast_to(np.asarray(s_hint, dtype=float), lead).reshape(-1)
            offsets = np.arange(-_WINDOW, _WINDOW + 0.5 * _WINDOW_STEP, _WINDOW_STEP)
            cand = self._param(hint[:, None] + offsets[None, :])
            xy = self._spline(cand)
            d2 = np.sum((xy - p[:, None, :]) ** 2, axis=-1)
            s = cand[np.arange(len(p)), np.argmin(d2, axis=1)]
            step = _WINDOW_STEP

        for _ in range(_NEWTON_ITERS):
            q = self._param(s)
            r = self._spline(q) - p
            d1 = self._spline(q, 1)
            d2s = self._spline(q, 2)
            f = np.sum(r * d1, axis=1)
            fp = np.sum(d1 * d1, axis=1) + np.sum(r * d2s, axis=1)
            delta = np.where(fp > 1e-12, f / np.where(fp > 1e-12, fp, 1.0), 0.0)
            s = s - np.clip(delta, -step, step)
        s = self._param(s)

        foot = self._spline(s)
        t = self.tangent(s)
        offset = p - foot
        e_y = offset[:, 1] * t[:, 0] - offset[:, 0] * t[:, 1]
        residual = np.sum(offset * t, axis=1)
        return s.reshape(lead), e_y.reshape(lead), residual.reshape(lead)

    def unwrap(self, s_new, s_prev):
        """Continue an unwrapped progress value across the start line."""
        s_new = np.asarray(s_new, dtype=float)
        s_prev = np.asarray(s_prev, dtype=float)
        if not self.closed:
            return s_new
        half = 0.5 * self.length
        ds = np.mod(s_new - s_prev + half, self.length) - half
        return s_prev + ds


def to_frenet(pose: Tuple[float, float, float], track: TrackGeometry,
              s_hint: Optional[float] = None) -> FrenetPose:
    """
    Frenet pose (s, e_y, e_psi) of a Cartesian pose (p_x, p_y, psi).
    
    Raises:
        OffTrackError: If the point is outside the corridor where the
            projection is unique
    """
    px, py, psi = (float(v) for v in pose)
    s, e_y, residual = track.project(np.array([px, py]), s_hint)
    s, e_y, residual = float(s), float(e_y), float(residual)
    corridor = min(track.min_turn_radius, 0.5 * track.length)
    if abs(e_y) >= corridor or abs(residual) > 1e-6:
        raise OffTrackError("off-track projection")
    e_psi = float(wrap_angle(psi - track.heading(s)))
    return FrenetPose(s, e_y, e_psi)


def from_frenet(pose: FrenetPose, track: TrackGeometry) -> Tuple[float, float, float]:
    """Cartesian pose (p_x, p_y, psi) of a Frenet pose."""
    foot = track.position(pose.s)
    t = track.tangent(pose.s)
    normal = np.array([-t[1], t[0]])
    xy = foot + pose.e_y * normal
    psi = float(wrap_angle(track.heading(pose.s) + pose.e_psi))
    return float(xy[0]), float(xy[1]), psi
