"""
`nnet.py`:

This module contains a small differentiable engine for residual MLPs.
It supports forward evaluation, forward-mode tangents (JVP), reverse-mode
cotangents (VJP), full Jacobians and the parameter gradient of a
JVP-contracted scalar, computed by a single reverse pass over the dual
(primal + tangent) forward trace.

Network wiring: y = block_k(...block_1(x)...), where each block is
x + L_d(act(L_{d-1}(...act(L_1(x))))) when `residual` is set, and the bare
inner MLP otherwise. All functions accept a single point of shape (m,) or a
batch of shape (B, m); parameter gradients are summed over the batch.
"""

from dataclasses import dataclass, asdict
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.special import expit

from src.exceptions import DimensionMismatch

ACTIVATIONS = ("relu", "silu", "sin")


@dataclass(frozen=True)
class NetworkSpec:
    """
    Architecture of a residual MLP.

    Attributes:
        input_dim: Input and output dimension m
        residual_blocks: Number of blocks
        inner_depth: Linear layers per block
        inner_width: Hidden units of the inner layers
        activation: One of relu, silu, sin
        init_scale: Scale applied to each block's final layer at initialization
        residual: Add the skip connection around every block
    """
    input_dim: int
    residual_blocks: int = 2
    inner_depth: int = 2
    inner_width: int = 64
    activation: str = "silu"
    init_scale: float = 1e-2
    residual: bool = True

    def __post_init__(self):
        for name in ("input_dim", "residual_blocks", "inner_depth", "inner_width"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if not np.isfinite(self.init_scale) or self.init_scale < 0.0:
            raise ValueError(f"init_scale must be finite and nonnegative, got {self.init_scale}")

    def block_dims(self) -> List[int]:
        """Layer widths inside one block, input first."""
        return [self.input_dim] + [self.inner_width] * (self.inner_depth - 1) + [self.input_dim]

    def layer_shapes(self) -> List[Tuple[int, int]]:
        """(out, in) of every linear layer in flattening order."""
        dims = self.block_dims()
        per_block = [(dims[i + 1], dims[i]) for i in range(self.inner_depth)]
        return per_block * self.residual_blocks

    @property
    def parameter_count(self) -> int:
        return sum(rows * cols + rows for rows, cols in self.layer_shapes())

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NetworkSpec":
        return cls(
            input_dim=int(data["input_dim"]),
            residual_blocks=int(data["residual_blocks"]),
            inner_depth=int(data["inner_depth"]),
            inner_width=int(data["inner_width"]),
            activation=str(data["activation"]),
            init_scale=float(data["init_scale"]),
            residual=bool(data.get("residual", True)),
        )


class NetworkParams:
    """
    Weights and biases of a residual MLP backed by one flat vector.

    `weights[k][l]` and `biases[k][l]` are views into `flat` for block k and
    layer l, so in-place updates of `flat` are seen by the network.
    """

    def __init__(self, spec: NetworkSpec, flat: Optional[np.ndarray] = None):
        self.spec = spec
        if flat is None:
            flat = np.zeros(spec.parameter_count)
        flat = np.array(flat, dtype=np.float64)
        if flat.shape != (spec.parameter_count,):
            raise DimensionMismatch(f"Expected {spec.parameter_count} parameters, got shape {flat.shape}")
        self.flat = flat
        self.weights, self.biases = _layer_views(spec, self.flat)

    def assign(self, flat: np.ndarray) -> None:
        """Overwrite all parameters in place."""
        self.flat[...] = flat

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.spec, self.flat.copy())

    def __len__(self) -> int:
        return self.flat.size


def _layer_views(spec: NetworkSpec, flat: np.ndarray) -> Tuple[List[List[np.ndarray]], List[List[np.ndarray]]]:
    weights: List[List[np.ndarray]] = []
    biases: List[List[np.ndarray]] = []
    offset = 0
    shapes = spec.layer_shapes()
    for block in range(spec.residual_blocks):
        block_w, block_b = [], []
        for rows, cols in shapes[block * spec.inner_depth:(block + 1) * spec.inner_depth]:
            block_w.append(flat[offset:offset + rows * cols].reshape(rows, cols))
            offset += rows * cols
            block_b.append(flat[offset:offset + rows])
            offset += rows
        weights.append(block_w)
        biases.append(block_b)
    return weights, biases


def init_near_identity(spec: NetworkSpec, rng: np.random.Generator) -> NetworkParams:
    """
    Initialize a network close to the identity map.

    Weights are drawn from N(0, 1/fan_in), biases start at zero and the final
    layer of every block is multiplied by `spec.init_scale`, so init_scale=0
    yields the exact identity for residual networks.

    Args:
        spec (NetworkSpec): Architecture
        rng (np.random.Generator): Random source

    Returns:
        NetworkParams: Freshly initialized parameters
    """
    params = NetworkParams(spec)
    for block_w in params.weights:
        for layer, w in enumerate(block_w):
            w[...] = rng.standard_normal(w.shape) / np.sqrt(w.shape[1])
            if layer == len(block_w) - 1:
                w *= spec.init_scale
    return params


def _activate(name: str, h: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Activation value with its first and second derivatives."""
    if name == "relu":
        return np.maximum(h, 0.0), (h > 0.0).astype(np.float64), np.zeros_like(h)
    if name == "silu":
        s = expit(h)
        return h * s, s * (1.0 + h * (1.0 - s)), s * (1.0 - s) * (2.0 + h * (1.0 - 2.0 * s))
    return np.sin(h), np.cos(h), -np.sin(h)


@dataclass
class _LayerRecord:
    inputs: np.ndarray
    tangents: Optional[np.ndarray]
    # derivatives of the activation that produced `inputs`; None for the block input
    d1: Optional[np.ndarray] = None
    d2: Optional[np.ndarray] = None
    pre_tangent: Optional[np.ndarray] = None


def _as_batch(params: NetworkParams, x) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != params.spec.input_dim:
        raise DimensionMismatch(f"Network expects inputs of dimension {params.spec.input_dim}, got shape {x.shape}")
    return np.atleast_2d(x), x.ndim == 1


def _forward_trace(params: NetworkParams, x: np.ndarray, xdot: Optional[np.ndarray]):
    spec = params.spec
    trace: List[List[_LayerRecord]] = []
    a, ad = x, xdot
    for block_w, block_b in zip(params.weights, params.biases):
        records = []
        h_a, h_ad = a, ad
        record = _LayerRecord(h_a, h_ad)
        for layer, (w, b) in enumerate(zip(block_w, block_b)):
            records.append(record)
            h = h_a @ w.T + b
            hd = None if h_ad is None else h_ad @ w.T
            if layer < len(block_w) - 1:
                act, d1, d2 = _activate(spec.activation, h)
                h_a = act
                h_ad = None if hd is None else d1 * hd
                record = _LayerRecord(h_a, h_ad, d1, d2, hd)
            else:
                h_a, h_ad = h, hd
        trace.append(records)
        if spec.residual:
            a = a + h_a
            ad = None if ad is None else ad + h_ad
        else:
            a, ad = h_a, h_ad
    return a, ad, trace


def _backward(params: NetworkParams, trace, y_bar: np.ndarray, ydot_bar: Optional[np.ndarray]):
    spec = params.spec
    grads = NetworkParams(spec)
    a_bar, ad_bar = y_bar, ydot_bar
    for k in reversed(range(spec.residual_blocks)):
        o_bar, od_bar = a_bar, ad_bar
        records = trace[k]
        for layer in reversed(range(spec.inner_depth)):
            w = params.weights[k][layer]
            rec = records[layer]
            gw = o_bar.T @ rec.inputs
            if od_bar is not None and rec.tangents is not None:
                gw = gw + od_bar.T @ rec.tangents
            grads.weights[k][layer][...] = gw
            grads.biases[k][layer][...] = o_bar.sum(axis=0)
            in_bar = o_bar @ w
            ind_bar = None if od_bar is None else od_bar @ w
            if rec.d1 is None:
                o_bar, od_bar = in_bar, ind_bar
                continue
            o_bar = in_bar * rec.d1
            if ind_bar is not None and rec.pre_tangent is not None:
                o_bar = o_bar + ind_bar * rec.d2 * rec.pre_tangent
            od_bar = None if ind_bar is None else ind_bar * rec.d1
        if spec.residual:
            a_bar = a_bar + o_bar
            if ad_bar is not None:
                ad_bar = ad_bar + od_bar
        else:
            a_bar, ad_bar = o_bar, od_bar
    return a_bar, ad_bar, grads.flat


def forward(params: NetworkParams, x) -> np.ndarray:
    """
    Evaluate the network.

    Args:
        params (NetworkParams): Network parameters
        x: Input of shape (m,) or (B, m)

    Returns:
        np.ndarray: Output with the shape of x
    """
    batch, single = _as_batch(params, x)
    y, _, _ = _forward_trace(params, batch, None)
    return y[0] if single else y


def jvp(params: NetworkParams, x, w) -> Tuple[np.ndarray, np.ndarray]:
    """
    Forward-mode derivative: returns (f(x), J_f(x)·w).
    """
    batch, single = _as_batch(params, x)
    tangent = np.broadcast_to(np.asarray(w, dtype=np.float64), batch.shape)
    y, yd, _ = _forward_trace(params, batch, tangent)
    return (y[0], yd[0]) if single else (y, yd)


def vjp(params: NetworkParams, x, u) -> Tuple[np.ndarray, np.ndarray]:
    """
    Reverse-mode derivative of the scalar u·f(x).

    Args:
        params (NetworkParams): Network parameters
        x: Input of shape (m,) or (B, m)
        u: Output cotangent, broadcastable to x

    Returns:
        Tuple of (J_f(x)ᵀu with the shape of x, flat parameter gradient of length P)
    """
    batch, single = _as_batch(params, x)
    cotangent = np.broadcast_to(np.asarray(u, dtype=np.float64), batch.shape)
    _, _, trace = _forward_trace(params, batch, None)
    x_bar, _, grads = _backward(params, trace, cotangent, None)
    return (x_bar[0] if single else x_bar), grads


def dual_backward(params: NetworkParams, x, w, y_bar, ydot_bar):
    """
    One reverse pass over the dual trace of (f(x), J_f(x)·w).

    Returns the gradients of the scalar y_bar·f(x) + ydot_bar·J_f(x)w with
    respect to x, w and the parameters, together with the forward values.

    Args:
        params (NetworkParams): Network parameters
        x: Inputs, shape (B, m)
        w: Input tangents, shape (B, m)
        y_bar: Primal output cotangent, shape (B, m)
        ydot_bar: Tangent output cotangent, shape (B, m)

    Returns:
        Tuple of (y, ydot, x_bar, w_bar, param_grads)
    """
    batch, _ = _as_batch(params, x)
    tangent = np.broadcast_to(np.asarray(w, dtype=np.float64), batch.shape)
    y, yd, trace = _forward_trace(params, batch, tangent)
    primal_bar = np.broadcast_to(np.asarray(y_bar, dtype=np.float64), batch.shape)
    tangent_bar = np.broadcast_to(np.asarray(ydot_bar, dtype=np.float64), batch.shape)
    x_bar, w_bar, grads = _backward(params, trace, primal_bar, tangent_bar)
    return y, yd, x_bar, w_bar, grads


def grad_of_jvp(params: NetworkParams, x, w, u) -> np.ndarray:
    """
    Parameter gradient of u·J_f(x)·w with x, w and u held constant.

    Args:
        params (NetworkParams): Network parameters
        x: Input of shape (m,) or (B, m)
        w: Input tangent, broadcastable to x
        u: Cotangent contracting the output tangent

    Returns:
        np.ndarray: Flat gradient of length P, summed over the batch
    """
    batch, _ = _as_batch(params, x)
    _, _, _, _, grads = dual_backward(params, batch, w, np.zeros_like(batch), u)
    return grads


def jacobian(params: NetworkParams, x) -> np.ndarray:
    """
    Full input Jacobian, built from m JVPs over the canonical basis.

    Args:
        params (NetworkParams): Network parameters
        x: Input of shape (m,) or (B, m)

    Returns:
        np.ndarray: J of shape (m, m) or (B, m, m) with column i equal to J·e_i
    """
    batch, single = _as_batch(params, x)
    m = params.spec.input_dim
    repeated = np.repeat(batch, m, axis=0)
    basis = np.tile(np.eye(m), (batch.shape[0], 1))
    _, columns = jvp(params, repeated, basis)
    jac = np.swapaxes(columns.reshape(batch.shape[0], m, m), -1, -2)
    return jac[0] if single else jac
