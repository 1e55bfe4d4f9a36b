"""
Distance from a point to the convex hull of its nearest safe-set states.

The exact distance uses Wolfe's minimum-norm-point method: a fully corrective
Frank-Wolfe scheme over the weight simplex that keeps an active set ("corral")
and re-solves the affine minimum-norm problem on it, so it terminates in
finitely many steps with the exact projection. The batched variant used for
sample costs runs accelerated projected gradient on the simplex for all
queries at once; every iterate is a point of the hull, so it can only
over-estimate the distance.
"""
from typing import Tuple

import numpy as np

from core.safe_set import SafeSet

DEFAULT_K_NEIGHBORS = 32
DEFAULT_MAX_ITER = 200
DEFAULT_TOL = 1e-9

_WEIGHT_EPS = 1e-12
_GAP_TOL = 1e-12


def _affine_min_norm(Q: np.ndarray) -> np.ndarray:
    """Weights v (sum 1) minimizing ||Q^T v|| over the affine hull of the rows of Q."""
    m = len(Q)
    kkt = np.zeros((m + 1, m + 1))
    kkt[:m, :m] = Q @ Q.T
    kkt[:m, m] = 1.0
    kkt[m, :m] = 1.0
    rhs = np.zeros(m + 1)
    rhs[m] = 1.0
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:m]


def min_norm_point(Q: np.ndarray, max_iter: int = DEFAULT_MAX_ITER) -> Tuple[np.ndarray, np.ndarray]:
    """
    Minimum-norm point of conv(rows of Q).
    
    Args:
        Q: (m, d) points
        max_iter: Cap on major cycles
    
    Returns:
        (point y of shape (d,), weights of shape (m,))
    """
    Q = np.asarray(Q, dtype=float)
    m = len(Q)
    sq = np.einsum('ij,ij->i', Q, Q)
    scale = max(float(sq.max()), 1.0)

    corral = [int(np.argmin(sq))]
    w = np.array([1.0])
    y = Q[corral[0]].copy()
    for _ in range(max_iter):
        g = Q @ y
        j = int(np.argmin(g))
        if y @ y - g[j] <= _GAP_TOL * scale or j in corral:
            break
        corral.append(j)
        w = np.append(w, 0.0)
        # Minor cycles: move toward the affine minimizer until it is interior
        while True:
            v = _affine_min_norm(Q[corral])
            if np.all(v > _WEIGHT_EPS):
                w = v
                break
            shrink = (v <= _WEIGHT_EPS) & (w - v > 0)
            if not np.any(shrink):
                w = np.clip(v, 0.0, None)
                w /= w.sum()
                break
            theta = float(np.min(w[shrink] / (w[shrink] - v[shrink])))
            w = (1.0 - theta) * w + theta * v
            keep = w > _WEIGHT_EPS
            corral = [c for c, k in zip(corral, keep) if k]
            w = w[keep] / w[keep].sum()
            if len(corral) == 1:
                break
        y = w @ Q[corral]

    weights = np.zeros(m)
    weights[corral] = w
    return y, weights


def hull_distance(point: np.ndarray, safe_set: SafeSet,
                  k_neighbors: int = DEFAULT_K_NEIGHBORS,
                  max_iter: int = DEFAULT_MAX_ITER) -> float:
    """
    Euclidean distance from ``point`` to the convex hull of its k nearest
    safe-set states, in the safe set's (optionally normalized) metric.
    
    Returns 0 when the point lies inside that local hull.
    
    Raises:
        EmptySafeSetError: If the safe set has no entries
    """
    _, nbrs, query = safe_set.neighbors(np.asarray(point, dtype=float).reshape(1, -1), k_neighbors)
    y, _ = min_norm_point(nbrs[0] - query[0], max_iter=max_iter)
    return float(np.linalg.norm(y))


def hull_weights(point: np.ndarray, safe_set: SafeSet,
                 k_neighbors: int = DEFAULT_K_NEIGHBORS,
                 max_iter: int = DEFAULT_MAX_ITER) -> Tuple[np.ndarray, np.ndarray]:
    """
    Convex weights of the local-hull point closest to ``point``.

    Returns:
        (neighbour entry indices (k,), weights (k,) summing to 1)
    """
    idx, nbrs, query = safe_set.neighbors(np.asarray(point, dtype=float).reshape(1, -1), k_neighbors)
    _, weights = min_norm_point(nbrs[0] - query[0], max_iter=max_iter)
    return idx[0], weights


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Row-wise Euclidean projection onto the probability simplex."""
    n = v.shape[1]
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    ks = np.arange(1, n + 1)
    cond = u - css / ks > 0
    rho = n - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(len(v)), rho] / (rho + 1)
    return np.maximum(v - theta[:, None], 0.0)


def hull_distances(points: np.ndarray, safe_set: SafeSet,
                   k_neighbors: int = DEFAULT_K_NEIGHBORS,
                   max_iter: int = DEFAULT_MAX_ITER,
                   tol: float = DEFAULT_TOL) -> np.ndarray:
    """
    Batched local-hull distances for many query points.
    
    Accelerated projected gradient on the weight simplex, warm-started at the
    nearest neighbour. The returned value is the best iterate's distance, an
    upper bound on the exact local-hull distance.
    
    Args:
        points: (B, n_x) queries
        safe_set: Nonempty safe set
        k_neighbors: Hull size per query
        max_iter: Iteration cap
        tol: Stop once no weight moves by more than this
    
    Returns:
        (B,) nonnegative distances
    """
    points = np.array(points, dtype=float, ndmin=2)
    _, nbrs, query = safe_set.neighbors(points, k_neighbors)
    Q = nbrs - query[:, None, :]
    B, k, _ = Q.shape
    if k == 1:
        return np.linalg.norm(Q[:, 0, :], axis=1)

    lipschitz = np.linalg.norm(Q, ord=2, axis=(1, 2)) ** 2
    step = 1.0 / np.maximum(lipschitz, 1e-12)

    w = np.zeros((B, k))
    w[:, 0] = 1.0
    best = np.linalg.norm(Q[:, 0, :], axis=1)
    z = w.copy()
    t = 1.0
    for _ in range(max_iter):
        y = np.einsum('bkd,bk->bd', Q, z)
        grad = np.einsum('bkd,bd->bk', Q, y)
        w_next = _project_simplex(z - step[:, None] * grad)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = w_next + ((t - 1.0) / t_next) * (w_next - w)
        moved = float(np.max(np.abs(w_next - w)))
        w, t = w_next, t_next
        dist = np.linalg.norm(np.einsum('bkd,bk->bd', Q, w), axis=1)
        best = np.minimum(best, dist)
        if moved <= tol:
            break
    return best
