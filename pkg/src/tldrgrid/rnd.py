"""Random-network-distillation novelty bonus (ablation stand-in).

A frozen random target network is distilled by a trained predictor; the
squared prediction error is the novelty bonus. Used in place of the kNN
particle-entropy reward when goal_selection = "rnd".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn


@dataclass
class RndBonus:
    target: nn.DenseParams     # frozen after initialization
    predictor: nn.DenseParams
    adam: nn.AdamState


def init_rnd(in_dim: int, hidden: int = 32, out_dim: int = 8,
             lr: float = 1e-3, rng=None) -> RndBonus:
    rng = rng if rng is not None else np.random.default_rng(0)
    widths = [in_dim, hidden, hidden, out_dim]
    target = nn.init_dense(widths, rng)
    predictor = nn.init_dense(widths, rng)
    return RndBonus(target=target, predictor=predictor,
                    adam=nn.init_adam(predictor, lr))


def bonus(r: RndBonus, s) -> np.ndarray:
    """Mean squared prediction error per input row."""
    s = np.atleast_2d(np.asarray(s, dtype=np.float64))
    err = nn.forward(r.predictor, s) - nn.forward(r.target, s)
    return (err ** 2).mean(axis=-1)


def update_predictor(r: RndBonus, s) -> float:
    """One distillation step on visited states; returns the loss."""
    s = np.atleast_2d(np.asarray(s, dtype=np.float64))
    y = nn.forward(r.target, s)
    wts, bts = nn.param_tensors(r.predictor)
    pred = nn.forward_tape(wts, bts, s)
    loss = (pred - y).square().mean()
    loss.backward()
    r.predictor, r.adam = nn.adam_step(r.adam, r.predictor, nn.collect_grads(wts, bts))
    return float(loss.data)
