"""Dense networks: parameter containers, forward passes, Adam, checkpoints."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO

import numpy as np

from .autodiff import Tensor

CHECKPOINT_MAGIC = b"TGNN"
CHECKPOINT_VERSION = 1


class ShapeError(ValueError):
    """Input or gradient shapes do not match the network."""


@dataclass
class DenseParams:
    """Weights and biases of an MLP. Hidden layers use the rectifier,
    the output layer is linear."""

    weights: list  # list of (in, out) float64 matrices
    biases: list   # list of (out,) float64 vectors

    @property
    def widths(self):
        ws = [w.shape[0] for w in self.weights]
        ws.append(self.weights[-1].shape[1])
        return ws

    def copy(self):
        return DenseParams([w.copy() for w in self.weights],
                           [b.copy() for b in self.biases])

    def check(self):
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape[1] != b.shape[0]:
                raise ShapeError(f"layer {i}: weight/bias mismatch")
            if i + 1 < len(self.weights) and w.shape[1] != self.weights[i + 1].shape[0]:
                raise ShapeError(f"layers {i},{i+1} do not compose")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ShapeError(f"layer {i}: non-finite parameters")


def init_dense(widths, rng) -> DenseParams:
    """Uniform fan-in initialization: U(-1/sqrt(n_in), 1/sqrt(n_in))."""
    weights, biases = [], []
    for n_in, n_out in zip(widths[:-1], widths[1:]):
        bound = 1.0 / np.sqrt(n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
        biases.append(rng.uniform(-bound, bound, size=n_out))
    return DenseParams(weights, biases)


def zeros_like_params(params: DenseParams) -> DenseParams:
    return DenseParams([np.zeros_like(w) for w in params.weights],
                       [np.zeros_like(b) for b in params.biases])


def forward(params: DenseParams, x) -> np.ndarray:
    """Plain numpy forward pass; x is (d,) or (n, d)."""
    h = np.asarray(x, dtype=np.float64)
    if h.shape[-1] != params.weights[0].shape[0]:
        raise ShapeError(
            f"input width {h.shape[-1]} != first layer width {params.weights[0].shape[0]}")
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i != last:
            h = np.maximum(h, 0.0)
    return h


def param_tensors(params: DenseParams):
    """Wrap parameters as tape leaves for a differentiable forward pass."""
    return ([Tensor(w) for w in params.weights], [Tensor(b) for b in params.biases])


def forward_tape(wts, bts, x) -> Tensor:
    """Differentiable forward pass; wts/bts from param_tensors, x a constant array."""
    h = Tensor(x) if not isinstance(x, Tensor) else x
    last = len(wts) - 1
    for i, (w, b) in enumerate(zip(wts, bts)):
        h = h @ w + b
        if i != last:
            h = h.relu()
    return h


def collect_grads(wts, bts) -> DenseParams:
    """Extract accumulated gradients into a DenseParams-shaped container."""
    return DenseParams([w.grad for w in wts], [b.grad for b in bts])


def forward_cached(params: DenseParams, x):
    """Forward pass keeping layer inputs for a fused backward pass."""
    h = np.asarray(x, dtype=np.float64)
    inputs = []
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        h = h @ w + b
        if i != last:
            h = np.maximum(h, 0.0)
    return h, inputs


def backward_fused(params: DenseParams, inputs, dout,
                   grads: DenseParams = None) -> DenseParams:
    """Backpropagate dout through the cached forward pass.

    Produces the same gradients as the tape, just without per-node
    bookkeeping. Pass `grads` to accumulate across several forwards.
    """
    if grads is None:
        grads = zeros_like_params(params)
    g = dout
    last = len(params.weights) - 1
    for i in range(last, -1, -1):
        if i != last:
            # relu mask: the layer output was max(pre, 0); pre > 0 wherever
            # the stored next-layer input is positive
            g = g * (inputs[i + 1] > 0)
        h = inputs[i]
        grads.weights[i] += h.T @ g if h.ndim > 1 else np.outer(h, g)
        grads.biases[i] += g.sum(axis=0) if g.ndim > 1 else g
        if i > 0:
            g = g @ params.weights[i].T
    return grads


# ---- Adam -----------------------------------------------------------------

@dataclass
class AdamState:
    m: DenseParams
    v: DenseParams
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(params: DenseParams, lr: float) -> AdamState:
    return AdamState(m=zeros_like_params(params), v=zeros_like_params(params), lr=lr)


def adam_step(state: AdamState, params: DenseParams, grads: DenseParams):
    """One Adam update with bias correction. Returns (params', state')."""
    if len(grads.weights) != len(params.weights):
        raise ShapeError("gradient layer count mismatch")
    for gw, pw in zip(grads.weights, params.weights):
        if gw.shape != pw.shape:
            raise ShapeError("gradient shape mismatch")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params.weights + params.biases,
                          grads.weights + grads.biases,
                          state.m.weights + state.m.biases,
                          state.v.weights + state.v.biases):
        m2 = b1 * m + (1 - b1) * g
        v2 = b2 * v + (1 - b2) * g * g
        p2 = p - state.lr * (m2 / c1) / (np.sqrt(v2 / c2) + state.eps)
        new_p.append(p2)
        new_m.append(m2)
        new_v.append(v2)
    k = len(params.weights)
    params2 = DenseParams(new_p[:k], new_p[k:])
    state2 = AdamState(m=DenseParams(new_m[:k], new_m[k:]),
                       v=DenseParams(new_v[:k], new_v[k:]),
                       step=t, lr=state.lr, beta1=b1, beta2=b2, eps=state.eps)
    return params2, state2


# ---- checkpoint serialization ---------------------------------------------

def _write_params(fh: BinaryIO, params: DenseParams):
    fh.write(struct.pack("<I", len(params.weights)))
    for w, b in zip(params.weights, params.biases):
        fh.write(struct.pack("<II", w.shape[0], w.shape[1]))
        fh.write(np.ascontiguousarray(w).tobytes())
        fh.write(np.ascontiguousarray(b).tobytes())


def _read_params(fh: BinaryIO) -> DenseParams:
    (n_layers,) = struct.unpack("<I", fh.read(4))
    weights, biases = [], []
    for _ in range(n_layers):
        rows, cols = struct.unpack("<II", fh.read(8))
        w = np.frombuffer(fh.read(8 * rows * cols), dtype=np.float64).reshape(rows, cols)
        b = np.frombuffer(fh.read(8 * cols), dtype=np.float64)
        weights.append(w.copy())
        biases.append(b.copy())
    return DenseParams(weights, biases)


def save_network(fh: BinaryIO, params: DenseParams, adam: AdamState):
    """Versioned binary layout: magic, version, layer count, per-layer
    (rows, cols, row-major weights, biases), then Adam moments in the
    same order."""
    fh.write(CHECKPOINT_MAGIC)
    fh.write(struct.pack("<I", CHECKPOINT_VERSION))
    _write_params(fh, params)
    _write_params(fh, adam.m)
    _write_params(fh, adam.v)
    fh.write(struct.pack("<qdddd", adam.step, adam.lr, adam.beta1, adam.beta2, adam.eps))


def load_network(fh: BinaryIO):
    magic = fh.read(4)
    if magic != CHECKPOINT_MAGIC:
        raise ValueError("bad checkpoint magic")
    (version,) = struct.unpack("<I", fh.read(4))
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    params = _read_params(fh)
    m = _read_params(fh)
    v = _read_params(fh)
    step, lr, b1, b2, eps = struct.unpack("<qdddd", fh.read(8 * 5))
    return params, AdamState(m=m, v=v, step=step, lr=lr, beta1=b1, beta2=b2, eps=eps)
