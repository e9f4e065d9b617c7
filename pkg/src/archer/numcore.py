"""Small dense MLPs in numpy: forward/backward passes, Adam and initializers.

Weights are stored as ``(in_dim, out_dim)`` arrays so a batch ``x`` of shape
``(n, in_dim)`` maps to ``x @ W + b``. Everything is float64.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError, ShapeError

ACTIVATIONS = ("relu", "tanh", "linear")

# Symmetric range for the output layer. Published value reads [-3e-3, 3e3],
# which is a typo for the usual small symmetric init.
FINAL_LAYER_RANGE = 3e-3


@dataclass
class Layer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ShapeError(
                f"layer weight {self.weight.shape} does not match bias {self.bias.shape}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]


@dataclass
class MlpParams:
    """Ordered stack of dense layers."""

    layers: list[Layer]

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("an MLP needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ShapeError(f"layer chain broken: {prev.out_dim} -> {nxt.in_dim}")

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def shapes(self) -> tuple:
        return tuple((l.in_dim, l.out_dim) for l in self.layers)

    def arrays(self) -> list[np.ndarray]:
        """Weight and bias arrays in layer order, ``[W0, b0, W1, b1, ...]``."""
        out = []
        for layer in self.layers:
            out.extend((layer.weight, layer.bias))
        return out

    def copy(self) -> "MlpParams":
        return MlpParams([Layer(l.weight.copy(), l.bias.copy(), l.activation)
                          for l in self.layers])

    def zeros_like(self) -> "MlpParams":
        return MlpParams([Layer(np.zeros_like(l.weight), np.zeros_like(l.bias), l.activation)
                          for l in self.layers])

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def set_flat(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=np.float64)
        pos = 0
        for a in self.arrays():
            a[...] = values[pos:pos + a.size].reshape(a.shape)
            pos += a.size
        if pos != values.size:
            raise ShapeError(f"expected {pos} values, got {values.size}")


@dataclass
class ForwardCache:
    shapes: tuple
    batched: bool
    inputs: list[np.ndarray]
    pre: list[np.ndarray]
    post: list[np.ndarray]


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    return z


def mlp_forward(params: MlpParams, x) -> tuple[np.ndarray, ForwardCache]:
    """Evaluate the network on one input vector or a ``(n, in_dim)`` batch."""
    x = np.asarray(x, dtype=np.float64)
    batched = x.ndim == 2
    if x.ndim not in (1, 2) or x.shape[-1] != params.in_dim:
        raise ShapeError(f"input shape {x.shape} incompatible with in_dim {params.in_dim}")
    h = x if batched else x[None, :]
    inputs, pre, post = [], [], []
    for layer in params.layers:
        inputs.append(h)
        z = h @ layer.weight + layer.bias
        h = _activate(z, layer.activation)
        pre.append(z)
        post.append(h)
    cache = ForwardCache(params.shapes, batched, inputs, pre, post)
    return (h if batched else h[0]), cache


def mlp_backward(params: MlpParams, cache: ForwardCache, grad_output, *, wrt_input=False):
    """Reverse-mode gradients of ``sum(output * grad_output)``.

    Returns an ``MlpParams`` holding dW/db per layer; with ``wrt_input=True``
    also the gradient with respect to the network input.
    """
    if cache.shapes != params.shapes:
        raise ShapeError("forward cache was produced by a different network")
    g = np.asarray(grad_output, dtype=np.float64)
    if not cache.batched:
        g = g[None, :] if g.ndim == 1 else g
    if g.shape != cache.post[-1].shape:
        raise ShapeError(f"grad_output shape {g.shape} != output shape {cache.post[-1].shape}")

    grads: list[Layer] = [None] * len(params.layers)  # type: ignore[list-item]
    for i in reversed(range(len(params.layers))):
        layer = params.layers[i]
        if layer.activation == "relu":
            g = g * (cache.pre[i] > 0.0)
        elif layer.activation == "tanh":
            g = g * (1.0 - cache.post[i] ** 2)
        grads[i] = Layer(cache.inputs[i].T @ g, g.sum(axis=0), layer.activation)
        if i > 0 or wrt_input:
            g = g @ layer.weight.T
    out = MlpParams(grads)
    if wrt_input:
        return out, (g if cache.batched else g[0])
    return out


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: MlpParams, **kw) -> "AdamState":
        return cls([np.zeros_like(a) for a in params.arrays()],
                   [np.zeros_like(a) for a in params.arrays()], **kw)

    def copy(self) -> "AdamState":
        return AdamState([a.copy() for a in self.m], [a.copy() for a in self.v],
                         self.step, self.beta1, self.beta2, self.eps)


def adam_step(params: MlpParams, grads: MlpParams, state: AdamState, lr: float):
    """One bias-corrected Adam update, applied in place. Returns ``(params, state)``."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    p_arrays, g_arrays = params.arrays(), grads.arrays()
    if [a.shape for a in p_arrays] != [a.shape for a in g_arrays] or \
            len(state.m) != len(p_arrays):
        raise ShapeError("gradient / optimizer state shapes do not match parameters")
    for g in g_arrays:
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient passed to adam_step")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(p_arrays, g_arrays, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def fanin_init(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform in ``[-1/sqrt(rows), 1/sqrt(rows)]``; ``rows`` is the fan-in."""
    bound = 1.0 / np.sqrt(rows)
    return rng.uniform(-bound, bound, size=(rows, cols))


def final_layer_init(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-FINAL_LAYER_RANGE, FINAL_LAYER_RANGE, size=(rows, cols))


def init_mlp(sizes: Sequence[int], output_activation: str,
             rng: np.random.Generator) -> MlpParams:
    """ReLU hidden layers with fan-in init, small uniform init on the output layer."""
    if len(sizes) < 2 or min(sizes) < 1:
        raise ShapeError(f"bad layer sizes {sizes}")
    layers = []
    n = len(sizes) - 1
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        if i == n - 1:
            w = final_layer_init(fan_in, fan_out, rng)
            b = final_layer_init(1, fan_out, rng)[0]
            layers.append(Layer(w, b, output_activation))
        else:
            w = fanin_init(fan_in, fan_out, rng)
            bound = 1.0 / np.sqrt(fan_in)
            b = rng.uniform(-bound, bound, size=fan_out)
            layers.append(Layer(w, b, "relu"))
    return MlpParams(layers)


def finite_diff_grad(f: Callable[[np.ndarray], float], x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat_x, flat_g = x.reshape(-1), grad.reshape(-1)
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + h
        fp = f(x)
        flat_x[i] = orig - h
        fm = f(x)
        flat_x[i] = orig
        flat_g[i] = (fp - fm) / (2.0 * h)
    return grad


# Snapshot format: u32 layer count, (u32 in, u32 out) per layer, then for each
# layer the weight (row-major) followed by the bias, all little-endian float64.

def dump_params(params: MlpParams) -> bytes:
    header = struct.pack("<I", len(params.layers))
    for l in params.layers:
        header += struct.pack("<II", l.in_dim, l.out_dim)
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in params.arrays())
    return header + body


def load_params_bytes(blob: bytes, activations: Sequence[str] | None = None,
                      output_activation: str = "linear") -> MlpParams:
    (count,) = struct.unpack_from("<I", blob, 0)
    dims = [struct.unpack_from("<II", blob, 4 + 8 * i) for i in range(count)]
    if activations is None:
        activations = ["relu"] * (count - 1) + [output_activation]
    if len(activations) != count:
        raise ShapeError("activation list does not match layer count")
    pos = 4 + 8 * count
    layers = []
    for (fan_in, fan_out), act in zip(dims, activations):
        w = np.frombuffer(blob, dtype="<f8", count=fan_in * fan_out, offset=pos)
        pos += 8 * fan_in * fan_out
        b = np.frombuffer(blob, dtype="<f8", count=fan_out, offset=pos)
        pos += 8 * fan_out
        layers.append(Layer(w.reshape(fan_in, fan_out).astype(np.float64),
                            b.astype(np.float64), act))
    if pos != len(blob):
        raise ShapeError(f"snapshot has {len(blob) - pos} trailing bytes")
    return MlpParams(layers)


def save_params(params: MlpParams, path) -> None:
    Path(path).write_bytes(dump_params(params))


def load_params(path, activations=None, output_activation="linear") -> MlpParams:
    return load_params_bytes(Path(path).read_bytes(), activations, output_activation)
