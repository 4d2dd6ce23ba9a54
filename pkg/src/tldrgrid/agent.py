"""Twin-Q soft value learning over the discrete action set.

Both the goal-conditioned policy (input: state features ++ goal features)
and the exploration policy (input: state features) are realized as a pair
of independent Q heads with Polyak-averaged target copies. Acting follows
a softmax of min(Q1, Q2) / alpha; TD targets bootstrap the soft state value
under the target pair. Episodes are fixed-horizon, so there is no terminal
masking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn


@dataclass
class QPair:
    q1: nn.DenseParams
    q2: nn.DenseParams
    target1: nn.DenseParams
    target2: nn.DenseParams
    adam1: nn.AdamState
    adam2: nn.AdamState
    alpha: float          # entropy temperature
    gamma: float
    tau: float            # Polyak coefficient: target <- tau*target + (1-tau)*online


def init_qpair(in_dim: int, n_actions: int, hidden: int = 64, depth: int = 2,
               lr: float = 1e-3, alpha: float = 0.01, gamma: float = 0.97,
               tau: float = 0.995, rng=None) -> QPair:
    rng = rng if rng is not None else np.random.default_rng(0)
    widths = [in_dim] + [hidden] * depth + [n_actions]
    q1 = nn.init_dense(widths, rng)
    q2 = nn.init_dense(widths, rng)
    return QPair(q1=q1, q2=q2, target1=q1.copy(), target2=q2.copy(),
                 adam1=nn.init_adam(q1, lr), adam2=nn.init_adam(q2, lr),
                 alpha=alpha, gamma=gamma, tau=tau)


def min_q(q: QPair, x, target: bool = False) -> np.ndarray:
    a = q.target1 if target else q.q1
    b = q.target2 if target else q.q2
    return np.minimum(nn.forward(a, x), nn.forward(b, x))


def policy_distribution(q: QPair, x) -> np.ndarray:
    """softmax(min(Q1, Q2) / alpha) over actions."""
    logits = min_q(q, x) / q.alpha
    logits = logits - logits.max(axis=-1, keepdims=True)
    p = np.exp(logits)
    return p / p.sum(axis=-1, keepdims=True)


def act(q: QPair, x, mode: str, rng=None) -> int:
    """Pick an action. Greedy mode breaks ties toward the lowest index."""
    if mode == "greedy":
        return int(np.argmax(min_q(q, x)))
    if mode == "stochastic":
        p = policy_distribution(q, x)
        return int(rng.choice(p.shape[-1], p=p))
    raise ValueError(f"unknown mode {mode!r}")


def soft_value(q: QPair, x, target: bool = True) -> np.ndarray:
    """alpha * logsumexp(min(Q1, Q2) / alpha) over actions, numerically stable."""
    vals = min_q(q, x, target=target)
    m = vals.max(axis=-1)
    return m + q.alpha * np.log(
        np.exp((vals - m[..., None]) / q.alpha).sum(axis=-1))


def td_targets(q: QPair, rewards, xp) -> np.ndarray:
    rewards = np.asarray(rewards, dtype=np.float64)
    return rewards + q.gamma * soft_value(q, np.atleast_2d(xp), target=True)


def _head_loss_grads(params, x, actions, y):
    """Mean squared TD error of one head and its parameter gradients."""
    n = x.shape[0]
    out, cache = nn.forward_cached(params, x)
    pred = out[np.arange(n), actions]
    err = pred - y
    loss = float((err ** 2).mean())
    dout = np.zeros_like(out)
    dout[np.arange(n), actions] = 2.0 * err / n
    return loss, nn.backward_fused(params, cache, dout)


def td_update(q: QPair, x, actions, rewards, xp) -> float:
    """One TD regression step on both heads. Returns the mean squared TD error.

    Targets are r + gamma * soft_value(target pair, s'); no terminal cutoff.
    """
    x = np.atleast_2d(x)
    actions = np.asarray(actions, dtype=np.int64)
    y = td_targets(q, rewards, xp)
    total = 0.0
    for head, adam_name in (("q1", "adam1"), ("q2", "adam2")):
        loss, grads = _head_loss_grads(getattr(q, head), x, actions, y)
        new_params, new_adam = nn.adam_step(getattr(q, adam_name),
                                            getattr(q, head), grads)
        setattr(q, head, new_params)
        setattr(q, adam_name, new_adam)
        total += loss
    return total / 2.0


def td_loss_value(q: QPair, x, actions, rewards, xp, head: str = "q1"):
    """Loss and gradients of one head without updating; used for gradient checks."""
    x = np.atleast_2d(x)
    actions = np.asarray(actions, dtype=np.int64)
    y = td_targets(q, rewards, xp)
    return _head_loss_grads(getattr(q, head), x, actions, y)


def td_loss_tape(q: QPair, x, actions, rewards, xp, head: str = "q1"):
    """Tape-based reference for the TD loss; used for cross-verification."""
    x = np.atleast_2d(x)
    actions = np.asarray(actions, dtype=np.int64)
    y = td_targets(q, rewards, xp)
    n, n_act = x.shape[0], q.q1.weights[-1].shape[1]
    onehot = np.zeros((n, n_act))
    onehot[np.arange(n), actions] = 1.0
    params = getattr(q, head)
    wts, bts = nn.param_tensors(params)
    pred = (nn.forward_tape(wts, bts, x) * onehot).sum(axis=-1)
    loss = (pred - y).square().mean()
    loss.backward()
    return float(loss.data), nn.collect_grads(wts, bts)


def polyak_update(q: QPair):
    """target <- tau * target + (1 - tau) * online, elementwise, in place."""
    for online, target in ((q.q1, q.target1), (q.q2, q.target2)):
        for w_t, w_o in zip(target.weights, online.weights):
            w_t *= q.tau
            w_t += (1.0 - q.tau) * w_o
        for b_t, b_o in zip(target.biases, online.biases):
            b_t *= q.tau
            b_t += (1.0 - q.tau) * b_o


def save_qpair(fh, q: QPair):
    import struct
    nn.save_network(fh, q.q1, q.adam1)
    nn.save_network(fh, q.q2, q.adam2)
    fh.write(struct.pack("<I", len(q.target1.weights)))
    for params in (q.target1, q.target2):
        for w, b in zip(params.weights, params.biases):
            fh.write(np.ascontiguousarray(w).tobytes())
            fh.write(np.ascontiguousarray(b).tobytes())
    fh.write(struct.pack("<ddd", q.alpha, q.gamma, q.tau))


def load_qpair(fh) -> QPair:
    import struct
    q1, adam1 = nn.load_network(fh)
    q2, adam2 = nn.load_network(fh)
    (n_layers,) = struct.unpack("<I", fh.read(4))
    targets = []
    for ref in (q1, q2):
        weights, biases = [], []
        for w, b in zip(ref.weights, ref.biases):
            weights.append(np.frombuffer(fh.read(w.nbytes), dtype=np.float64)
                           .reshape(w.shape).copy())
            biases.append(np.frombuffer(fh.read(b.nbytes), dtype=np.float64).copy())
        targets.append(nn.DenseParams(weights, biases))
    alpha, gamma, tau = struct.unpack("<ddd", fh.read(24))
    return QPair(q1=q1, q2=q2, target1=targets[0], target2=targets[1],
                 adam1=adam1, adam2=adam2, alpha=alpha, gamma=gamma, tau=tau)
