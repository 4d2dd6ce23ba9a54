import io
import math

import numpy as np
import pytest

from tldrgrid import agent, nn


def linear_qpair(w1, b1, w2, b2, alpha=1.0, gamma=0.9, tau=0.5, lr=1e-3):
    """A QPair with single-layer (purely linear) heads for hand calculation."""
    q1 = nn.DenseParams([np.array(w1, dtype=float)], [np.array(b1, dtype=float)])
    q2 = nn.DenseParams([np.array(w2, dtype=float)], [np.array(b2, dtype=float)])
    return agent.QPair(q1=q1, q2=q2, target1=q1.copy(), target2=q2.copy(),
                       adam1=nn.init_adam(q1, lr), adam2=nn.init_adam(q2, lr),
                       alpha=alpha, gamma=gamma, tau=tau)


def test_min_q_elementwise():
    q = linear_qpair([[1.0, 2.0, 3.0]], [0.0, 0.0, 0.0],
                     [[2.0, 2.0, 2.0]], [0.0, 0.0, 0.0])
    out = agent.min_q(q, np.array([1.0]))
    assert np.array_equal(out, [1.0, 2.0, 2.0])


def test_policy_distribution_hand_case():
    # min(Q1, Q2) = [1, 2, 2], alpha = 1 -> softmax = [1, e, e] / (1 + 2e)
    q = linear_qpair([[1.0, 2.0, 3.0]], [0.0, 0.0, 0.0],
                     [[2.0, 2.0, 2.0]], [0.0, 0.0, 0.0])
    p = agent.policy_distribution(q, np.array([1.0]))
    e = math.e
    want = np.array([1.0, e, e]) / (1.0 + 2.0 * e)
    assert p == pytest.approx(want, rel=1e-12)
    assert p.sum() == pytest.approx(1.0)


def test_policy_distribution_shift_invariant():
    q = linear_qpair([[1.0, 2.0, 3.0]], [0.0, 0.0, 0.0],
                     [[2.0, 2.0, 2.0]], [0.0, 0.0, 0.0])
    q_shift = linear_qpair([[1.0, 2.0, 3.0]], [5.0, 5.0, 5.0],
                           [[2.0, 2.0, 2.0]], [5.0, 5.0, 5.0])
    p = agent.policy_distribution(q, np.array([1.0]))
    ps = agent.policy_distribution(q_shift, np.array([1.0]))
    assert p == pytest.approx(ps, rel=1e-12)


def test_policy_distribution_stable_at_extreme_logits():
    q = linear_qpair([[1000.0, 0.0]], [0.0, 0.0],
                     [[1000.0, 0.0]], [0.0, 0.0], alpha=0.01)
    p = agent.policy_distribution(q, np.array([1.0]))
    assert np.all(np.isfinite(p))
    assert p[0] == pytest.approx(1.0)


def test_greedy_act_and_tie_break():
    q = linear_qpair([[1.0, 3.0, 2.0]], [0.0, 0.0, 0.0],
                     [[9.0, 9.0, 9.0]], [0.0, 0.0, 0.0])
    assert agent.act(q, np.array([1.0]), "greedy") == 1
    tie = linear_qpair([[2.0, 2.0, 1.0]], [0.0, 0.0, 0.0],
                       [[9.0, 9.0, 9.0]], [0.0, 0.0, 0.0])
    assert agent.act(tie, np.array([1.0]), "greedy") == 0
    with pytest.raises(ValueError):
        agent.act(q, np.array([1.0]), "epsilon")


def test_stochastic_act_deterministic_under_seed():
    q = agent.init_qpair(2, 4, rng=np.random.default_rng(5))
    x = np.array([0.3, 0.7])
    a = [agent.act(q, x, "stochastic", np.random.default_rng(42)) for _ in range(20)]
    b = [agent.act(q, x, "stochastic", np.random.default_rng(42)) for _ in range(20)]
    assert a == b


def test_stochastic_act_matches_distribution():
    q = linear_qpair([[0.0, 1.0]], [0.0, 0.0], [[0.0, 1.0]], [0.0, 0.0], alpha=1.0)
    rng = np.random.default_rng(0)
    x = np.array([1.0])
    p1 = math.e / (1.0 + math.e)
    hits = sum(agent.act(q, x, "stochastic", rng) == 1 for _ in range(20_000))
    assert hits / 20_000 == pytest.approx(p1, abs=0.01)


def test_soft_value_hand_case():
    # min Q = [1, 2, 2], alpha = 1 -> V = log(e + 2 e^2)
    q = linear_qpair([[1.0, 2.0, 3.0]], [0.0, 0.0, 0.0],
                     [[2.0, 2.0, 2.0]], [0.0, 0.0, 0.0])
    v = agent.soft_value(q, np.array([1.0]), target=False)
    assert v == pytest.approx(math.log(math.e + 2.0 * math.e ** 2), rel=1e-12)


def test_soft_value_upper_bounds_max_q():
    rng = np.random.default_rng(1)
    q = agent.init_qpair(3, 4, alpha=0.01, rng=rng)
    x = rng.normal(size=(10, 3))
    v = agent.soft_value(q, x, target=False)
    mx = agent.min_q(q, x).max(axis=-1)
    assert np.all(v >= mx)
    assert np.all(v <= mx + 0.01 * math.log(4) + 1e-12)


def test_td_targets_hand_case():
    q = linear_qpair([[1.0]], [0.0], [[1.0]], [0.0], alpha=1.0, gamma=0.5)
    # single action: soft value at x' = [2.0] is exactly Q = 2.0
    y = agent.td_targets(q, np.array([3.0]), np.array([[2.0]]))
    assert y[0] == pytest.approx(3.0 + 0.5 * 2.0, rel=1e-12)


def test_td_gamma_zero_regresses_to_rewards():
    rng = np.random.default_rng(2)
    q = agent.init_qpair(2, 3, hidden=32, lr=3e-3, gamma=0.0, tau=0.0, rng=rng)
    x = rng.uniform(size=(16, 2))
    actions = rng.integers(0, 3, size=16)
    r = rng.uniform(-1, 1, size=16)
    for _ in range(3000):
        loss = agent.td_update(q, x, actions, r, x)
    pred = nn.forward(q.q1, x)[np.arange(16), actions]
    assert loss < 1e-3
    assert np.abs(pred - r).max() < 0.08


def test_td_fused_gradients_match_tape_and_finite_difference():
    rng = np.random.default_rng(3)
    q = agent.init_qpair(2, 3, hidden=8, rng=rng)
    x = rng.uniform(size=(6, 2))
    actions = rng.integers(0, 3, size=6)
    r = rng.uniform(size=6)
    xp = rng.uniform(size=(6, 2))
    loss_f, grads_f = agent.td_loss_value(q, x, actions, r, xp)
    loss_t, grads_t = agent.td_loss_tape(q, x, actions, r, xp)
    assert loss_f == pytest.approx(loss_t, rel=1e-12)
    for gf, gt in zip(grads_f.weights, grads_t.weights):
        assert np.max(np.abs(gf - gt)) < 1e-12
    # spot-check against central differences on a handful of weights
    eps = 1e-6
    for (li, i, j) in [(0, 0, 0), (0, 1, 3), (1, 2, 1), (2, 0, 2)]:
        w = q.q1.weights[li]
        orig = w[i, j]
        w[i, j] = orig + eps
        up, _ = agent.td_loss_value(q, x, actions, r, xp)
        w[i, j] = orig - eps
        dn, _ = agent.td_loss_value(q, x, actions, r, xp)
        w[i, j] = orig
        fd = (up - dn) / (2 * eps)
        assert grads_f.weights[li][i, j] == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_polyak_update_formula():
    q = linear_qpair([[1.0]], [1.0], [[1.0]], [1.0], tau=0.9)
    q.q1.weights[0][0, 0] = 3.0
    q.q1.biases[0][0] = 5.0
    agent.polyak_update(q)
    assert q.target1.weights[0][0, 0] == pytest.approx(0.9 * 1.0 + 0.1 * 3.0)
    assert q.target1.biases[0][0] == pytest.approx(0.9 * 1.0 + 0.1 * 5.0)
    # online parameters untouched
    assert q.q1.weights[0][0, 0] == 3.0


def test_polyak_fixpoint():
    rng = np.random.default_rng(4)
    q = agent.init_qpair(2, 3, rng=rng)
    before = [w.copy() for w in q.target1.weights]
    agent.polyak_update(q)  # online == target at init
    for b, a in zip(before, q.target1.weights):
        assert np.allclose(b, a, atol=1e-15)


def test_chain_mdp_converges_to_value_iteration():
    # Deterministic 1-action chain s0 -> s1 -> s2 -> T -> T with reward 1 on
    # the s2 -> T step and gamma = 0.5. The unique fixpoint is
    # Q(s0) = 0.25, Q(s1) = 0.5, Q(s2) = 1, Q(T) = 0.
    feats = np.array([[0.0], [0.4], [0.8], [1.6]])
    x = feats[[0, 1, 2, 3]]
    xp = feats[[1, 2, 3, 3]]
    r = np.array([0.0, 0.0, 1.0, 0.0])
    actions = np.zeros(4, dtype=np.int64)
    q = agent.init_qpair(1, 1, hidden=32, lr=3e-3, alpha=1e-3, gamma=0.5,
                         tau=0.5, rng=np.random.default_rng(11))
    for _ in range(4000):
        agent.td_update(q, x, actions, r, xp)
        agent.polyak_update(q)
    got = agent.min_q(q, feats)[:, 0]
    want = np.array([0.25, 0.5, 1.0, 0.0])
    assert np.abs(got - want).max() < 1e-2


def test_qpair_checkpoint_roundtrip():
    rng = np.random.default_rng(12)
    q = agent.init_qpair(3, 4, rng=rng)
    x = rng.uniform(size=(16, 3))
    agent.td_update(q, x, rng.integers(0, 4, size=16), rng.uniform(size=16), x)
    agent.polyak_update(q)
    buf = io.BytesIO()
    agent.save_qpair(buf, q)
    buf.seek(0)
    q2 = agent.load_qpair(buf)
    for a, b in ((q.q1, q2.q1), (q.q2, q2.q2), (q.target1, q2.target1),
                 (q.target2, q2.target2)):
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)
        for ba, bb in zip(a.biases, b.biases):
            assert np.array_equal(ba, bb)
    assert (q2.alpha, q2.gamma, q2.tau) == (q.alpha, q.gamma, q.tau)
    assert np.array_equal(q.adam1.m.weights[0], q2.adam1.m.weights[0])
    assert q.adam1.step == q2.adam1.step
