"""
Conditional neural spline flow for the iteration cost given a state.

The flow is defined in the cost -> latent direction: the cost is normalized,
then passed through ``n_layers`` rational-quadratic splines whose parameters
come from a per-layer conditioner network of the (normalized) state. The
latent is standard normal. Sampling runs the splines' inverses in reverse
order, so g(z, x) maps a latent draw to a cost.
"""
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.special import expit

from core.errors import CheckpointError
from utils.files import atomic_write_bytes
from valuefn.spline import SplineKnots, SplineShape, rq_backward, rq_forward, rq_inverse, rq_knots

MODEL_VERSION = 1
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def softplus(a: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, a)


@dataclass(frozen=True)
class FlowArchitecture:
    n_context: int
    n_layers: int = 4
    hidden: int = 96
    n_hidden_layers: int = 2
    spline: SplineShape = field(default_factory=SplineShape)

    def dense_shapes(self) -> List[Tuple[int, int]]:
        """(fan_in, fan_out) of each dense layer of one conditioner."""
        sizes = [self.n_context] + [self.hidden] * self.n_hidden_layers + [self.spline.n_params]
        return list(zip(sizes[:-1], sizes[1:]))

    @property
    def params_per_layer(self) -> int:
        return sum(i * o + o for i, o in self.dense_shapes())

    @property
    def n_params(self) -> int:
        return self.n_layers * self.params_per_layer

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> 'FlowArchitecture':
        data = dict(data)
        data['spline'] = SplineShape(**data['spline'])
        return cls(**data)


class SplineFlowModel:
    """Flow parameters plus the context and cost normalizers."""

    def __init__(self, arch: FlowArchitecture, params: np.ndarray,
                 context_mean: np.ndarray, context_std: np.ndarray,
                 cost_mean: float, cost_std: float, loss_history: Optional[List[float]] = None):
        params = np.asarray(params, dtype=float).reshape(-1)
        if len(params) != arch.n_params:
            raise ValueError(f"expected {arch.n_params} parameters, got {len(params)}")
        self.arch = arch
        self.params = params
        self.context_mean = np.asarray(context_mean, dtype=float).reshape(arch.n_context)
        self.context_std = np.asarray(context_std, dtype=float).reshape(arch.n_context)
        self.cost_mean = float(cost_mean)
        self.cost_std = float(cost_std)
        if not (np.all(np.isfinite(self.context_mean)) and np.all(self.context_std > 0)
                and math.isfinite(self.cost_mean) and self.cost_std > 0):
            raise ValueError("normalizers must be finite with positive scales")
        self.loss_history = list(loss_history or [])

    @classmethod
    def initialize(cls, arch: FlowArchitecture, rng: np.random.Generator,
                   states: Optional[np.ndarray] = None, costs: Optional[np.ndarray] = None) -> 'SplineFlowModel':
        """
        Glorot-uniform hidden layers and zero output layers, so every spline
        starts as the identity. Normalizers come from (states, costs) if given.
        """
        chunks = []
        for _ in range(arch.n_layers):
            shapes = arch.dense_shapes()
            for j, (fan_in, fan_out) in enumerate(shapes):
                if j == len(shapes) - 1:
                    chunks.append(np.zeros(fan_in * fan_out))
                else:
                    limit = math.sqrt(6.0 / (fan_in + fan_out))
                    chunks.append(rng.uniform(-limit, limit, fan_in * fan_out))
                chunks.append(np.zeros(fan_out))
        model = cls(arch, np.concatenate(chunks), np.zeros(arch.n_context), np.ones(arch.n_context), 0.0, 1.0)
        if states is not None and costs is not None:
            model = model.with_normalizers(states, costs)
        return model

    def with_normalizers(self, states: np.ndarray, costs: np.ndarray,
                         params: Optional[np.ndarray] = None) -> 'SplineFlowModel':
        """Copy with normalizers refit to a dataset (std floors at 1 for constant columns)."""
        states = np.array(states, dtype=float, ndmin=2)
        costs = np.asarray(costs, dtype=float).reshape(-1)
        ctx_std = states.std(axis=0)
        cost_std = float(costs.std())
        return SplineFlowModel(
            self.arch,
            self.params.copy() if params is None else params,
            states.mean(axis=0),
            np.where(ctx_std > 1e-8, ctx_std, 1.0),
            float(costs.mean()),
            cost_std if cost_std > 1e-8 else 1.0,
            self.loss_history,
        )

    # ============ CONDITIONER ============

    def _layers(self, params: np.ndarray) -> List[List[Tuple[np.ndarray, np.ndarray]]]:
        layers, offset = [], 0
        for _ in range(self.arch.n_layers):
            dense = []
            for fan_in, fan_out in self.arch.dense_shapes():
                W = params[offset:offset + fan_in * fan_out].reshape(fan_in, fan_out)
                offset += fan_in * fan_out
                b = params[offset:offset + fan_out]
                offset += fan_out
                dense.append((W, b))
            layers.append(dense)
        return layers

    @staticmethod
    def _conditioner(dense, ctx: np.ndarray):
        acts, pres = [ctx], []
        h = ctx
        for j, (W, b) in enumerate(dense):
            a = h @ W + b
            if j == len(dense) - 1:
                return a, (acts, pres)
            pres.append(a)
            h = softplus(a)
            acts.append(h)

    @staticmethod
    def _conditioner_backward(dense, cache, g_out: np.ndarray, grads) -> None:
        acts, pres = cache
        g = g_out
        for j in range(len(dense) - 1, -1, -1):
            W, _ = dense[j]
            gW, gb = grads[j]
            gW += acts[j].T @ g
            gb += g.sum(axis=0)
            if j > 0:
                g = (g @ W.T) * expit(pres[j - 1])

    def normalize_context(self, states: np.ndarray) -> np.ndarray:
        return (np.array(states, dtype=float, ndmin=2) - self.context_mean) / self.context_std

    def _knots(self, ctx: np.ndarray, params: Optional[np.ndarray] = None) -> List[SplineKnots]:
        layers = self._layers(self.params if params is None else params)
        return [rq_knots(self._conditioner(dense, ctx)[0], self.arch.spline) for dense in layers]

    # ============ TRANSFORMS ============

    def inverse_logdet(self, costs: np.ndarray, states: np.ndarray,
                       params: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
        """
        Latent and log|d g^-1 / dJ| for each (cost, state) pair.
        
        Args:
            costs: (n,) costs
            states: (n, n_context) states
        
        Returns:
            (z, logdet), both (n,)
        """
        ctx = self.normalize_context(states)
        y = ((np.asarray(costs, dtype=float).reshape(-1) - self.cost_mean) / self.cost_std)[:, None]
        logdet = np.full_like(y, -math.log(self.cost_std))
        bound = self.arch.spline.bound
        for knots in self._knots(ctx, params):
            y, ld, _ = rq_forward(y, knots, bound)
            logdet = logdet + ld
        return y[:, 0], logdet[:, 0]

    def forward(self, z: np.ndarray, states: np.ndarray) -> np.ndarray:
        """
        Costs g(z, x) for latents z of shape (n, m) and states (n, n_context).
        """
        ctx = self.normalize_context(states)
        y = np.array(z, dtype=float, ndmin=2)
        bound = self.arch.spline.bound
        for knots in reversed(self._knots(ctx)):
            y = rq_inverse(y, knots, bound)
        return self.cost_mean + self.cost_std * y

    # ============ LOSS ============

    def nll(self, states: np.ndarray, costs: np.ndarray, params: Optional[np.ndarray] = None) -> float:
        z, logdet = self.inverse_logdet(costs, states, params)
        return float(np.mean(0.5 * z * z + _HALF_LOG_2PI - logdet))

    def nll_and_grad(self, states: np.ndarray, costs: np.ndarray,
                     params: Optional[np.ndarray] = None) -> Tuple[float, np.ndarray]:
        """Mean negative log-likelihood and its gradient with respect to the flat parameters."""
        params = self.params if params is None else params
        ctx = self.normalize_context(states)
        y = ((np.asarray(costs, dtype=float).reshape(-1) - self.cost_mean) / self.cost_std)[:, None]
        n = len(y)
        shape = self.arch.spline
        layers = self._layers(params)

        total_ld = np.zeros_like(y)
        tape = []
        for dense in layers:
            raw, mlp_cache = self._conditioner(dense, ctx)
            knots = rq_knots(raw, shape)
            y, ld, spline_cache = rq_forward(y, knots, shape.bound)
            total_ld += ld
            tape.append((mlp_cache, knots, spline_cache))
        z = y
        loss = float(np.mean(0.5 * z * z + _HALF_LOG_2PI - total_ld) + math.log(self.cost_std))

        grad = np.zeros_like(params)
        grad_layers = self._layers(grad)
        g_y = z / n
        g_ld = np.full_like(z, -1.0 / n)
        for dense, grads, (mlp_cache, knots, spline_cache) in zip(reversed(layers), reversed(grad_layers),
                                                                 reversed(tape)):
            g_y, g_raw = rq_backward(spline_cache, knots, shape, g_y, g_ld)
            self._conditioner_backward(dense, mlp_cache, g_raw, grads)
        return loss, grad


# ============ MODULE API ============

def flow_forward(z, x, model: SplineFlowModel):
    """Cost sample g(z, x). Scalar z and a single state give a float."""
    scalar = np.ndim(z) == 0 and np.ndim(x) == 1
    states = np.array(x, dtype=float, ndmin=2)
    zs = np.asarray(z, dtype=float).reshape(len(states), -1)
    out = model.forward(zs, states)
    return float(out[0, 0]) if scalar else out.reshape(np.shape(z))


def flow_inverse_logdet(cost, x, model: SplineFlowModel):
    """(z, log|d g^-1 / dJ|) for a cost and its state; scalars in give floats out."""
    scalar = np.ndim(cost) == 0
    z, logdet = model.inverse_logdet(np.atleast_1d(cost), np.array(x, dtype=float, ndmin=2))
    if scalar:
        return float(z[0]), float(logdet[0])
    return z, logdet


def value_estimate(x, model: SplineFlowModel, n_latent: int, rng: np.random.Generator):
    """
    Mean of g(z_i, x) over ``n_latent`` standard-normal draws, floored at 0.
    
    The same draws are shared by every state of one call. A single state
    gives a float, a (B, n_context) batch gives (B,).
    """
    if n_latent < 1:
        raise ValueError("n_latent must be >= 1")
    single = np.ndim(x) == 1
    states = np.array(x, dtype=float, ndmin=2)
    z = rng.standard_normal(n_latent)
    costs = model.forward(np.broadcast_to(z, (len(states), n_latent)), states)
    values = np.maximum(costs.mean(axis=1), 0.0)
    return float(values[0]) if single else values


# ============ CHECKPOINTS ============

def save_model(model: SplineFlowModel, path: Union[str, Path]) -> None:
    header = {
        'version': MODEL_VERSION,
        'architecture': model.arch.to_dict(),
        'cost_mean': model.cost_mean,
        'cost_std': model.cost_std,
    }
    buf = io.BytesIO()
    np.savez(buf,
             header=np.array(json.dumps(header)),
             params=model.params,
             context_mean=model.context_mean,
             context_std=model.context_std,
             loss_history=np.asarray(model.loss_history, dtype=float))
    atomic_write_bytes(path, buf.getvalue())


def load_model(path: Union[str, Path]) -> SplineFlowModel:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"model checkpoint {path} not found")
    try:
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data['header']))
            if header.get('version') != MODEL_VERSION:
                raise CheckpointError(f"unsupported model version {header.get('version')!r}")
            return SplineFlowModel(
                FlowArchitecture.from_dict(header['architecture']),
                data['params'],
                data['context_mean'],
                data['context_std'],
                header['cost_mean'],
                header['cost_std'],
                data['loss_history'].tolist(),
            )
    except CheckpointError:
        raise
    except (OSError, ValueError, KeyError) as e:
        raise CheckpointError(f"corrupt model checkpoint {path}: {e}") from e
