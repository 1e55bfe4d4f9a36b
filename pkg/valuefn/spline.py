"""
Monotone rational-quadratic splines on [-B, B] with identity tails, plus the
reverse-mode derivatives used for training.

Each spline is parameterized by an unconstrained vector of length 3K - 1:
K bin widths, K bin heights and K - 1 interior knot derivatives. The boundary
derivatives are fixed to 1 so the spline joins the identity tails smoothly.
Zero parameters give the identity map.

Shapes: spline parameters are per row (n, ...); values are (n, m), so one
set of spline parameters can transform m values at once.
"""
from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np
from scipy.special import expit, softmax


@dataclass(frozen=True)
class SplineShape:
    n_bins: int = 8
    bound: float = 4.0
    min_bin_width: float = 1e-3
    min_bin_height: float = 1e-3
    min_derivative: float = 1e-3

    def __post_init__(self):
        if self.n_bins < 1 or self.bound <= 0:
            raise ValueError("need n_bins >= 1 and a positive bound")
        if self.min_bin_width * self.n_bins >= 1.0 or self.min_bin_height * self.n_bins >= 1.0:
            raise ValueError("minimum bin size too large for the number of bins")
        if not 0.0 <= self.min_derivative < 1.0:
            raise ValueError("min_derivative must be in [0, 1)")

    @property
    def n_params(self) -> int:
        return 3 * self.n_bins - 1

    @property
    def derivative_offset(self) -> float:
        # softplus(offset) == 1 - min_derivative, so zero input gives derivative 1
        return float(np.log(np.expm1(1.0 - self.min_derivative)))


class SplineKnots(NamedTuple):
    x_knots: np.ndarray
    y_knots: np.ndarray
    derivs: np.ndarray
    widths_sm: np.ndarray
    heights_sm: np.ndarray
    deriv_pre: np.ndarray


def _cumulative_knots(sm: np.ndarray, min_size: float, n_bins: int, bound: float) -> np.ndarray:
    sizes = min_size + (1.0 - min_size * n_bins) * sm
    knots = np.concatenate([np.zeros((len(sm), 1)), np.cumsum(sizes, axis=1)], axis=1)
    knots = 2.0 * bound * knots - bound
    knots[:, 0] = -bound
    knots[:, -1] = bound
    return knots


def rq_knots(raw: np.ndarray, shape: SplineShape) -> SplineKnots:
    """Knot positions and derivatives from unconstrained parameters (n, 3K - 1)."""
    K = shape.n_bins
    raw = np.asarray(raw, dtype=float)
    widths_sm = softmax(raw[:, :K], axis=1)
    heights_sm = softmax(raw[:, K:2 * K], axis=1)
    deriv_pre = raw[:, 2 * K:] + shape.derivative_offset
    interior = shape.min_derivative + np.logaddexp(0.0, deriv_pre)
    ones = np.ones((len(raw), 1))
    return SplineKnots(
        x_knots=_cumulative_knots(widths_sm, shape.min_bin_width, K, shape.bound),
        y_knots=_cumulative_knots(heights_sm, shape.min_bin_height, K, shape.bound),
        derivs=np.concatenate([ones, interior, ones], axis=1),
        widths_sm=widths_sm,
        heights_sm=heights_sm,
        deriv_pre=deriv_pre,
    )


def _locate(knots: np.ndarray, values: np.ndarray) -> np.ndarray:
    return np.sum(values[..., None] >= knots[:, None, 1:-1], axis=-1)


def _gather(arr: np.ndarray, idx: np.ndarray) -> np.ndarray:
    return np.take_along_axis(arr, idx, axis=1)


def rq_forward(y: np.ndarray, knots: SplineKnots, bound: float) -> Tuple[np.ndarray, np.ndarray, dict]:
    """
    Apply the spline.
    
    Args:
        y: (n, m) inputs
        knots: Per-row spline
        bound: Tail bound B
    
    Returns:
        (outputs, log-derivatives, cache for ``rq_backward``)
    """
    inside = np.abs(y) <= bound
    yc = np.clip(y, -bound, bound)
    k = _locate(knots.x_knots, yc)
    X = _gather(knots.x_knots, k)
    W = _gather(knots.x_knots, k + 1) - X
    Y = _gather(knots.y_knots, k)
    H = _gather(knots.y_knots, k + 1) - Y
    Dk = _gather(knots.derivs, k)
    Dk1 = _gather(knots.derivs, k + 1)
    s = H / W
    t = (yc - X) / W
    t1 = t * (1.0 - t)

    num = H * (s * t * t + Dk * t1)
    den = s + (Dk1 + Dk - 2.0 * s) * t1
    q = Dk1 * t * t + 2.0 * s * t1 + Dk * (1.0 - t) ** 2
    dn = s * s * q

    out = np.where(inside, Y + num / den, y)
    logdet = np.where(inside, np.log(dn) - 2.0 * np.log(den), 0.0)
    cache = dict(inside=inside, k=k, W=W, H=H, Dk=Dk, Dk1=Dk1, s=s, t=t, t1=t1,
                 num=num, den=den, q=q, dn=dn)
    return out, logdet, cache


def rq_inverse(out: np.ndarray, knots: SplineKnots, bound: float) -> np.ndarray:
    """Exact inverse of ``rq_forward`` (root of the per-bin quadratic)."""
    inside = np.abs(out) <= bound
    oc = np.clip(out, -bound, bound)
    k = _locate(knots.y_knots, oc)
    X = _gather(knots.x_knots, k)
    W = _gather(knots.x_knots, k + 1) - X
    Y = _gather(knots.y_knots, k)
    H = _gather(knots.y_knots, k + 1) - Y
    Dk = _gather(knots.derivs, k)
    Dk1 = _gather(knots.derivs, k + 1)
    s = H / W

    delta = oc - Y
    c2 = Dk1 + Dk - 2.0 * s
    a = H * (s - Dk) + delta * c2
    b = H * Dk - delta * c2
    c = -s * delta
    disc = np.maximum(b * b - 4.0 * a * c, 0.0)
    t = (2.0 * c) / (-b - np.sqrt(disc))
    return np.where(inside, t * W + X, out)


def _knots_to_softmax_grad(g_knots: np.ndarray, sm: np.ndarray, min_size: float,
                           n_bins: int, bound: float) -> np.ndarray:
    g_c = 2.0 * bound * g_knots[:, 1:n_bins]
    # knot j sums sizes 0..j-1, so size i collects knots i+1..K-1
    g_sizes = np.concatenate([np.cumsum(g_c[:, ::-1], axis=1)[:, ::-1],
                              np.zeros((len(g_knots), 1))], axis=1)
    g_sm = (1.0 - min_size * n_bins) * g_sizes
    return sm * (g_sm - np.sum(sm * g_sm, axis=1, keepdims=True))


def rq_backward(cache: dict, knots: SplineKnots, shape: SplineShape,
                g_out: np.ndarray, g_ld: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Reverse-mode derivatives of a scalar loss through ``rq_forward``.
    
    Args:
        cache: Cache returned by ``rq_forward``
        knots: The spline that produced it
        shape: Spline hyperparameters
        g_out: dLoss/d(outputs), (n, m)
        g_ld: dLoss/d(log-derivatives), (n, m)
    
    Returns:
        (dLoss/d(inputs) of shape (n, m), dLoss/d(raw parameters) of shape (n, 3K - 1))
    """
    c = cache
    inside = c['inside']
    W, H, Dk, Dk1, s, t, t1 = c['W'], c['H'], c['Dk'], c['Dk1'], c['s'], c['t'], c['t1']
    num, den, q, dn = c['num'], c['den'], c['q'], c['dn']
    g_out_in = np.where(inside, g_out, 0.0)
    g_ld_in = np.where(inside, g_ld, 0.0)

    g_num = g_out_in / den
    g_den = -g_out_in * num / den ** 2 - 2.0 * g_ld_in / den
    g_dn = g_ld_in / dn

    g_t = (g_num * H * (2.0 * s * t + Dk * (1.0 - 2.0 * t))
           + g_den * (Dk1 + Dk - 2.0 * s) * (1.0 - 2.0 * t)
           + g_dn * s * s * (2.0 * Dk1 * t + 2.0 * s * (1.0 - 2.0 * t) - 2.0 * Dk * (1.0 - t)))
    g_s = (g_num * H * t * t
           + g_den * (1.0 - 2.0 * t1)
           + g_dn * (2.0 * s * q + 2.0 * s * s * t1))
    g_H_direct = g_num * (s * t * t + Dk * t1)
    g_Dk = g_num * H * t1 + g_den * t1 + g_dn * s * s * (1.0 - t) ** 2
    g_Dk1 = g_den * t1 + g_dn * s * s * t * t
    g_Y = g_out_in

    # t = (y - X) / W and s = H / W
    g_y = np.where(inside, g_t / W, g_out)
    g_X = -g_t / W
    g_W = -g_t * t / W - g_s * s / W
    g_H = g_H_direct + g_s / W

    n, K = len(W), shape.n_bins
    k = c['k']
    rows = np.broadcast_to(np.arange(n)[:, None], k.shape)
    g_xk = np.zeros((n, K + 1))
    g_yk = np.zeros((n, K + 1))
    g_d = np.zeros((n, K + 1))
    np.add.at(g_xk, (rows, k), g_X - g_W)
    np.add.at(g_xk, (rows, k + 1), g_W)
    np.add.at(g_yk, (rows, k), g_Y - g_H)
    np.add.at(g_yk, (rows, k + 1), g_H)
    np.add.at(g_d, (rows, k), g_Dk)
    np.add.at(g_d, (rows, k + 1), g_Dk1)

    g_uw = _knots_to_softmax_grad(g_xk, knots.widths_sm, shape.min_bin_width, K, shape.bound)
    g_uh = _knots_to_softmax_grad(g_yk, knots.heights_sm, shape.min_bin_height, K, shape.bound)
    g_ud = g_d[:, 1:K] * expit(knots.deriv_pre)
    return g_y, np.concatenate([g_uw, g_uh, g_ud], axis=1)
