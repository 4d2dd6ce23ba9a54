"""Temporal-distance-aware state encoder.

The encoder phi maps normalized states to R^d so that the Euclidean norm
between embeddings estimates the number of environment steps between the
states. Training maximizes the mean transformed distance between random
state/goal pairs subject to a one-step displacement constraint
||phi(s) - phi(s')|| <= 1, enforced through a Lagrange multiplier updated
by dual gradient descent.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

from . import nn
from .autodiff import Tensor

F_OFFSET = 500.0
F_BETA = 0.01


@dataclass
class EncoderState:
    params: nn.DenseParams
    adam: nn.AdamState
    lam: float            # dual multiplier, kept >= 0
    lam_lr: float
    epsilon: float        # constraint relaxation
    dim: int
    step: int = 0


@dataclass
class ReprBatch:
    """Transition pairs plus goals drawn from the same minibatch."""
    s: np.ndarray    # (n, in_dim)
    sp: np.ndarray   # (n, in_dim)
    g: np.ndarray    # (n, in_dim)


def init_encoder(in_dim: int, dim: int = 4, hidden: int = 64, depth: int = 2,
                 lr: float = 1e-3, lam0: float = 3e3, lam_lr=None,
                 epsilon: float = 1e-3, rng=None) -> EncoderState:
    rng = rng if rng is not None else np.random.default_rng(0)
    widths = [in_dim] + [hidden] * depth + [dim]
    params = nn.init_dense(widths, rng)
    return EncoderState(params=params, adam=nn.init_adam(params, lr), lam=lam0,
                        lam_lr=lr if lam_lr is None else lam_lr,
                        epsilon=epsilon, dim=dim)


def f_transform(x):
    """Distance shaping: -softplus(F_OFFSET - x, beta=F_BETA).

    Monotone increasing with derivative in (0, 1); near-affine with slope
    just below 1 for distances far smaller than F_OFFSET.
    """
    z = F_BETA * (F_OFFSET - np.asarray(x, dtype=np.float64))
    return -(np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))) / F_BETA


def _f_transform_t(x: Tensor) -> Tensor:
    return -((F_OFFSET - x).softplus(beta=F_BETA))


def embed(enc: EncoderState, s) -> np.ndarray:
    return nn.forward(enc.params, s)


def temporal_distance(enc: EncoderState, s1, s2) -> float:
    """Estimated number of env steps between s1 and s2 (symmetric)."""
    return float(np.linalg.norm(embed(enc, s1) - embed(enc, s2)))


def repr_loss_tape(enc: EncoderState, batch: ReprBatch):
    """Tape-based reference for repr_loss; used for cross-verification."""
    if batch.s.shape[0] == 0:
        raise ValueError("empty batch")
    wts, bts = nn.param_tensors(enc.params)
    zs = nn.forward_tape(wts, bts, batch.s)
    zsp = nn.forward_tape(wts, bts, batch.sp)
    zg = nn.forward_tape(wts, bts, batch.g)
    d_sg = (zs - zg).l2norm(axis=-1)
    d_ss = (zs - zsp).l2norm(axis=-1)
    objective = (_f_transform_t(d_sg) + enc.lam * (1.0 - d_ss).minimum(enc.epsilon)).mean()
    loss = -objective
    loss.backward()
    return float(loss.data), nn.collect_grads(wts, bts)


def repr_loss(enc: EncoderState, batch: ReprBatch):
    """Negated training objective and its encoder gradients.

    loss = -mean[ f(||phi(s)-phi(g)||) + lam * min(eps, 1 - ||phi(s)-phi(s')||) ]
    lam is treated as a constant here; see dual_update.
    """
    n = batch.s.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    zs, cache_s = nn.forward_cached(enc.params, batch.s)
    zsp, cache_sp = nn.forward_cached(enc.params, batch.sp)
    zg, cache_g = nn.forward_cached(enc.params, batch.g)
    diff_sg = zs - zg
    diff_ss = zs - zsp
    d_sg = np.sqrt((diff_sg ** 2).sum(axis=-1))
    d_ss = np.sqrt((diff_ss ** 2).sum(axis=-1))
    penalty = np.minimum(enc.epsilon, 1.0 - d_ss)
    loss = -(f_transform(d_sg) + enc.lam * penalty).mean()

    # d loss / d d_sg = -f'(d_sg)/n; d loss / d d_ss = lam * active / n
    fprime = 1.0 / (1.0 + np.exp(-F_BETA * (F_OFFSET - d_sg)))
    dd_sg = -fprime / n
    dd_ss = enc.lam * ((1.0 - d_ss) < enc.epsilon) / n
    unit_sg = diff_sg / np.where(d_sg == 0.0, 1.0, d_sg)[:, None]
    unit_ss = diff_ss / np.where(d_ss == 0.0, 1.0, d_ss)[:, None]
    dz_sg = dd_sg[:, None] * unit_sg
    dz_ss = dd_ss[:, None] * unit_ss
    grads = nn.backward_fused(enc.params, cache_s, dz_sg + dz_ss)
    nn.backward_fused(enc.params, cache_g, -dz_sg, grads)
    nn.backward_fused(enc.params, cache_sp, -dz_ss, grads)
    return float(loss), grads


def constraint_terms(enc: EncoderState, s, sp) -> np.ndarray:
    """min(eps, 1 - ||phi(s) - phi(s')||) per transition."""
    d = np.linalg.norm(embed(enc, s) - embed(enc, sp), axis=-1)
    return np.minimum(enc.epsilon, 1.0 - d)


def dual_update(enc: EncoderState, s, sp) -> EncoderState:
    """Dual gradient step on lam: grows when transitions stretch past unit
    length, decays at a rate bounded by lam_lr * eps when slack."""
    mean_term = float(constraint_terms(enc, s, sp).mean())
    lam = max(0.0, enc.lam - enc.lam_lr * mean_term)
    return replace(enc, lam=lam)


def repr_update(enc: EncoderState, batch: ReprBatch):
    """One primal Adam step plus one dual step. Returns (enc', loss, mean step norm)."""
    loss, grads = repr_loss(enc, batch)
    params, adam = nn.adam_step(enc.adam, enc.params, grads)
    enc = replace(enc, params=params, adam=adam, step=enc.step + 1)
    enc = dual_update(enc, batch.s, batch.sp)
    d_ss = np.linalg.norm(embed(enc, batch.s) - embed(enc, batch.sp), axis=-1)
    return enc, loss, float(d_ss.mean())


def make_repr_batch(s, sp, rng) -> ReprBatch:
    """Goals are a uniform permutation of the minibatch next states."""
    perm = rng.permutation(s.shape[0])
    return ReprBatch(s=s, sp=sp, g=sp[perm])


# ---- checkpointing ----------------------------------------------------------

def save_encoder(fh, enc: EncoderState):
    nn.save_network(fh, enc.params, enc.adam)
    fh.write(struct.pack("<Idddq", enc.dim, enc.lam, enc.lam_lr, enc.epsilon, enc.step))


def load_encoder(fh) -> EncoderState:
    params, adam = nn.load_network(fh)
    fmt = "<Idddq"
    dim, lam, lam_lr, eps, step = struct.unpack(fmt, fh.read(struct.calcsize(fmt)))
    return EncoderState(params=params, adam=adam, lam=lam, lam_lr=lam_lr,
                        epsilon=eps, dim=dim, step=step)
