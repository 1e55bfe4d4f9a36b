"""
SVG figures for finished runs. Plotting only reads results; nothing here feeds
back into metrics.
"""
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from matplotlib.collections import LineCollection
from matplotlib.patches import Circle

from core.types import IterationRecord
from systems.environments import Environment, PointMassEnvironment, RacingEnvironment

PathLike = Union[str, Path]


def _speed(env: Optional[Environment], states: np.ndarray) -> np.ndarray:
    if isinstance(env, RacingEnvironment):
        return states[:, 2]
    return np.linalg.norm(states[:, 2:4], axis=1)


def _draw_environment(ax, env: Optional[Environment]) -> None:
    if isinstance(env, PointMassEnvironment):
        ax.add_patch(Circle(env.obstacle_center, env.obstacle_radius, color='0.8', zorder=0))
        ax.plot(*env.target[:2], marker='*', color='k', markersize=10, zorder=3)
    elif isinstance(env, RacingEnvironment):
        track = env.track
        s = np.linspace(0.0, track.length, 600)
        center = track.position(s)
        tangent = track.tangent(s)
        normal = np.stack([-tangent[:, 1], tangent[:, 0]], axis=1)
        for side in (1.0, -1.0):
            edge = center + side * track.half_width * normal
            ax.plot(edge[:, 0], edge[:, 1], color='k', linewidth=1.0, zorder=1)
        ax.plot(center[:, 0], center[:, 1], color='0.6', linewidth=0.5, linestyle='--', zorder=1)


def plot_cost_curves(curves: Dict[int, Sequence[float]], path: PathLike,
                     ylabel: str = 'iteration cost', title: str = '') -> None:
    """
    Per-seed cost curves as light traces with their mean on top.

    Args:
        curves: seed -> cost per iteration (index 0 is the demonstration)
        path: Output SVG file
    """
    fig, ax = plt.subplots(figsize=(6, 4))
    if curves:
        length = min(len(c) for c in curves.values())
        for seed, costs in sorted(curves.items()):
            ax.plot(np.arange(len(costs)), costs, color='tab:blue', alpha=0.25, linewidth=1.0)
        mean = np.mean([np.asarray(c[:length], dtype=float) for c in curves.values()], axis=0)
        ax.plot(np.arange(length), mean, color='tab:blue', linewidth=2.0, label='mean')
        ax.legend()
    ax.set_xlabel('iteration')
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format='svg')
    plt.close(fig)


def plot_trajectories(records: Sequence[IterationRecord], path: PathLike,
                      env: Optional[Environment] = None, title: str = '') -> None:
    """Closed-loop paths coloured by speed, drawn over the task geometry."""
    fig, ax = plt.subplots(figsize=(6, 5))
    _draw_environment(ax, env)
    speeds = [_speed(env, r.trajectory.states) for r in records if len(r.trajectory.states) > 1]
    vmax = max((float(s.max()) for s in speeds), default=1.0)
    norm = plt.Normalize(0.0, max(vmax, 1e-9))
    collection = None
    for record in records:
        xy = record.trajectory.states[:, :2]
        if len(xy) < 2:
            continue
        segments = np.stack([xy[:-1], xy[1:]], axis=1)
        collection = LineCollection(segments, cmap='viridis', norm=norm, linewidths=1.5, zorder=2,
                                    alpha=1.0 if record.feasible else 0.35)
        collection.set_array(_speed(env, record.trajectory.states)[:-1])
        ax.add_collection(collection)
    if collection is not None:
        fig.colorbar(collection, ax=ax, label='speed [m/s]')
    ax.autoscale_view()
    ax.set_aspect('equal', adjustable='datalim')
    ax.set_xlabel('x [m]')
    ax.set_ylabel('y [m]')
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format='svg')
    plt.close(fig)


def plot_comparison(mean_curves: Dict[str, Sequence[float]], path: PathLike,
                    ylabel: str = 'iteration cost') -> None:
    """Mean cost curve of each ablation variant on shared axes."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, curve in mean_curves.items():
        ax.plot(np.arange(len(curve)), curve, linewidth=1.8, label=label)
    ax.set_xlabel('iteration')
    ax.set_ylabel(ylabel)
    if mean_curves:
        ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format='svg')
    plt.close(fig)


def select_trajectories(records: List[IterationRecord], count: int = 6) -> List[IterationRecord]:
    """Evenly spaced records across the run, always including the first and last."""
    if len(records) <= count:
        return list(records)
    idx = np.unique(np.linspace(0, len(records) - 1, count).round().astype(int))
    return [records[i] for i in idx]
