"""End-to-end training loop: goal selection, Go/Explore rollouts, updates, eval.

Each epoch alternates goal-reaching and exploration rollouts, then runs a
fixed number of gradient steps. Goal-reaching episodes follow the
goal-conditioned policy for the whole horizon; exploration episodes switch
from the goal-conditioned policy to the exploration policy at a timestep
drawn uniformly from {0, ..., T-1}.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import agent, env, nn, replay, representation, rewards, rnd
from .config import RunConfig

METRICS_COLUMNS = ("epoch", "env_steps", "coverage_cells", "coverage_fraction",
                   "goals_reached", "mean_goal_distance", "lambda",
                   "constraint_residual", "mean_tldr_reward", "repr_loss",
                   "qg_loss", "qe_loss", "seed")


@dataclass
class MetricsRow:
    epoch: int
    env_steps: int
    coverage_cells: int
    coverage_fraction: float
    goals_reached: int
    mean_goal_distance: float
    lam: float
    constraint_residual: float
    mean_tldr_reward: float
    repr_loss: float
    qg_loss: float
    qe_loss: float
    seed: int

    def to_csv(self) -> str:
        vals = (self.epoch, self.env_steps, self.coverage_cells,
                repr(self.coverage_fraction), self.goals_reached,
                repr(self.mean_goal_distance), repr(self.lam),
                repr(self.constraint_residual), repr(self.mean_tldr_reward),
                repr(self.repr_loss), repr(self.qg_loss), repr(self.qe_loss),
                self.seed)
        return ",".join(str(v) for v in vals)


@dataclass
class RunState:
    cfg: RunConfig
    spec: env.MazeSpec
    enc: representation.EncoderState
    qg: agent.QPair
    qe: agent.QPair
    buffer: replay.ReplayBuffer
    norm: rewards.RunningMean
    rng: np.random.Generator
    rnd_bonus: rnd.RndBonus = None
    coverage: set = field(default_factory=set)
    visit_counts: dict = field(default_factory=dict)
    epoch: int = 0
    env_steps: int = 0
    next_traj_id: int = 0
    _last_eval: tuple = None
    _edge_cache: tuple = None  # (epoch, S, SP) distinct transitions


def init_run(cfg: RunConfig, spec=None) -> RunState:
    cfg.validate()
    if spec is None:
        spec = env.load_layout(cfg.layout,
                               horizon=cfg.horizon if cfg.horizon > 0 else None)
    rng = np.random.default_rng(cfg.seed)
    enc = representation.init_encoder(
        in_dim=2, dim=cfg.phi_dim, hidden=cfg.phi_hidden, depth=cfg.phi_depth,
        lr=cfg.phi_lr, lam0=cfg.lam0, lam_lr=cfg.lam_lr,
        epsilon=cfg.epsilon, rng=rng)
    qg = agent.init_qpair(4, env.N_ACTIONS, hidden=cfg.q_hidden, depth=cfg.q_depth,
                          lr=cfg.q_lr, alpha=cfg.alpha, gamma=cfg.gamma_goal,
                          tau=cfg.tau, rng=rng)
    qe = agent.init_qpair(2, env.N_ACTIONS, hidden=cfg.q_hidden, depth=cfg.q_depth,
                          lr=cfg.q_lr, alpha=cfg.alpha, gamma=cfg.gamma_explore,
                          tau=cfg.tau, rng=rng)
    rb = rnd.init_rnd(2, rng=rng) if cfg.goal_selection == "rnd" else None
    return RunState(cfg=cfg, spec=spec, enc=enc, qg=qg, qe=qe,
                    buffer=replay.ReplayBuffer(cfg.buffer_capacity, in_dim=2),
                    norm=rewards.RunningMean(), rng=rng, rnd_bonus=rb)


# ---- goal selection ----------------------------------------------------------

def select_goals(state: RunState, n: int = 1):
    """Top-n visited cells by novelty score, descending.

    Candidates are the distinct cells currently in the buffer, scored by
    their kNN distance to a visitation-weighted sample of buffer embeddings;
    goals are drawn with probability proportional to score. Querying
    distinct cells keeps rarely visited cells (the frontier) in the
    candidate set every time, duplicates in the reference sample carry the
    density signal that pushes well-visited regions toward zero, and the
    proportional draw spreads goals over the novel tail instead of pinning
    the single most novel cell, which the goal policy often cannot reach
    yet. Falls back to uniform choices when the buffer is too small to
    support the estimate or every score saturates at zero."""
    cfg = state.cfg
    buf = state.buffer
    if len(buf) == 0:
        free = state.spec.free_cells()
        picks = state.rng.integers(0, len(free), size=n)
        return [free[i] for i in picks]
    if len(buf) < cfg.k + 1 or cfg.goal_selection == "uniform":
        idx = buf.sample_indices(min(cfg.goal_batch, len(buf)), state.rng)
        picks = state.rng.integers(0, idx.shape[0], size=n)
        return [tuple(buf.S_CELL[i]) for i in idx[picks]]
    cells = np.unique(buf.S_CELL[buf._head:buf._tail], axis=0)
    feats = env.featurize_cells(state.spec, cells)
    if cfg.goal_selection == "rnd":
        scores = rnd.bonus(state.rnd_bonus, feats)
    else:
        ref_idx = buf.sample_indices(min(cfg.goal_batch, len(buf)), state.rng)
        ref = representation.embed(state.enc, buf.S[ref_idx])
        z = representation.embed(state.enc, feats)
        scores = rewards.tldr_rewards(z, ref, cfg.k)
    total = scores.sum()
    if total <= 0.0:
        picks = state.rng.integers(0, cells.shape[0], size=n)
    else:
        picks = state.rng.choice(cells.shape[0], size=n, p=scores / total)
    return [tuple(cells[i]) for i in picks]


def select_goal(state: RunState):
    return select_goals(state, 1)[0]


# ---- rollouts ----------------------------------------------------------------

def rollout_episode(state: RunState, goal_cell, ep_type: int, t_switch=None):
    """Collect one fixed-horizon episode and insert it into the buffer.

    Goal-reaching episodes follow the goal policy throughout. Exploration
    episodes follow it only while t < T_switch (uniform on {0, ..., T-1}
    unless given), then the exploration policy.
    """
    spec = state.spec
    cfg = state.cfg
    T = spec.horizon
    if ep_type == replay.EP_EXPLORE and t_switch is None:
        t_switch = int(state.rng.integers(0, T))
    if ep_type == replay.EP_GOAL:
        t_switch = T
    goal_feat = env.featurize(spec, goal_cell)
    traj_id = state.next_traj_id
    state.next_traj_id += 1
    s = env.reset(spec)
    state.coverage.add(s.cell)
    state.visit_counts[s.cell] = state.visit_counts.get(s.cell, 0) + 1
    cells = [s.cell]
    for t in range(T):
        s_feat = env.featurize(spec, s.cell)
        if t < t_switch:
            a = agent.act(state.qg, np.concatenate([s_feat, goal_feat]),
                          "stochastic", state.rng)
        else:
            a = agent.act(state.qe, s_feat, "stochastic", state.rng)
        s2 = env.step(spec, s, a)
        state.buffer.insert(replay.TransitionRecord(
            s=s_feat, a=a, sp=env.featurize(spec, s2.cell), traj_id=traj_id,
            t=t, traj_len=T, goal=goal_feat, ep_type=ep_type,
            s_cell=s.cell, sp_cell=s2.cell, goal_cell=tuple(goal_cell)))
        state.coverage.add(s2.cell)
        state.visit_counts[s2.cell] = state.visit_counts.get(s2.cell, 0) + 1
        cells.append(s2.cell)
        s = s2
    state.env_steps += T
    return cells


# ---- training ----------------------------------------------------------------

def _update_phi(state: RunState):
    """Encoder step on uniformly sampled *distinct* transitions.

    Raw replay is heavily visitation-skewed toward the start region, which
    starves the embedding of gradient signal exactly where geometry is
    hardest (distant cells whose grid coordinates are close, e.g. adjacent
    arms of a spiral). Weighting every explored transition equally keeps
    the embedding near-isometric as coverage grows. The deduplicated arrays
    are cached per epoch."""
    cfg = state.cfg
    if state._edge_cache is None or state._edge_cache[0] != state.epoch:
        S, SP = state.buffer.distinct_transitions()
        state._edge_cache = (state.epoch, S, SP)
    _, S, SP = state._edge_cache
    pick = state.rng.integers(S.shape[0], size=cfg.batch_size)
    batch = representation.make_repr_batch(S[pick], SP[pick], state.rng)
    state.enc, loss, mean_dss = representation.repr_update(state.enc, batch)
    return loss, mean_dss


def _mixed_batch_indices(state: RunState):
    """Half uniform, half recent: keeps value estimates current near the
    frontier, where uniform replay mass is thinnest."""
    cfg = state.cfg
    n_recent = cfg.batch_size // 2
    return np.concatenate([
        state.buffer.sample_indices(cfg.batch_size - n_recent, state.rng),
        state.buffer.sample_recent_indices(n_recent, state.rng,
                                           cfg.recent_window)])


def _update_goal_policy(state: RunState):
    cfg = state.cfg
    buf = state.buffer
    idx = _mixed_batch_indices(state)
    goals, goal_cells, _, _ = buf.her_relabel_indices(idx, state.rng,
                                                      cfg.relabel_ratio)
    s, sp = buf.S[idx], buf.SP[idx]
    if cfg.gcrl_reward == "sparse":
        r = np.where((buf.SP_CELL[idx] == goal_cells).all(axis=1), 0.0, -1.0)
    else:
        r = rewards.gcrl_rewards(s, sp, goals, state.enc)
    x = np.concatenate([s, goals], axis=1)
    xp = np.concatenate([sp, goals], axis=1)
    loss = agent.td_update(state.qg, x, buf.A[idx], r, xp)
    agent.polyak_update(state.qg)
    return loss


def _update_explore_policy(state: RunState):
    cfg = state.cfg
    buf = state.buffer
    idx = _mixed_batch_indices(state)
    s, sp = buf.S[idx], buf.SP[idx]
    ref_idx = buf.sample_indices(min(cfg.reference_batch, len(buf)), state.rng)
    if cfg.goal_selection == "rnd":
        raw_s = rnd.bonus(state.rnd_bonus, s)
        raw_sp = rnd.bonus(state.rnd_bonus, sp)
        div = state.norm.divisor
        r = raw_sp / div - raw_s / div
        state.norm.update(np.concatenate([raw_s, raw_sp]))
        rnd.update_predictor(state.rnd_bonus, s)
        mean_raw = float(raw_sp.mean())
    else:
        ref = representation.embed(state.enc, buf.S[ref_idx])
        r, raw_s, raw_sp = rewards.exploration_rewards_detail(
            s, sp, state.enc, ref, cfg.k, state.norm)
        mean_raw = float(raw_sp.mean())
    loss = agent.td_update(state.qe, s, buf.A[idx], r, sp)
    agent.polyak_update(state.qe)
    return loss, mean_raw


def train_epoch(state: RunState) -> MetricsRow:
    cfg = state.cfg
    n_goal_eps = (cfg.rollouts_per_epoch + 1) // 2
    goal_list = select_goals(state, n_goal_eps)
    gi = 0
    for i in range(cfg.rollouts_per_epoch):
        if i % 2 == 0:
            rollout_episode(state, goal_list[gi], replay.EP_GOAL)
            gi += 1
        else:
            rollout_episode(state, select_goal(state), replay.EP_EXPLORE)

    repr_loss = mean_dss = qg_loss = qe_loss = mean_raw = 0.0
    for _ in range(cfg.grad_steps_per_epoch):
        if cfg.update_order == "phi_first":
            for _ in range(cfg.phi_updates_per_step):
                repr_loss, mean_dss = _update_phi(state)
            for _ in range(cfg.qg_updates_per_step):
                qg_loss = _update_goal_policy(state)
            qe_loss, mean_raw = _update_explore_policy(state)
        else:
            for _ in range(cfg.qg_updates_per_step):
                qg_loss = _update_goal_policy(state)
            qe_loss, mean_raw = _update_explore_policy(state)
            for _ in range(cfg.phi_updates_per_step):
                repr_loss, mean_dss = _update_phi(state)

    state.epoch += 1
    if (state.epoch - 1) % max(cfg.eval_every, 1) == 0 or state._last_eval is None:
        state._last_eval = evaluate(state)[:2]
    reached, mean_dist = state._last_eval
    n_free = len(state.spec.free_cells())
    return MetricsRow(
        epoch=state.epoch, env_steps=state.env_steps,
        coverage_cells=len(state.coverage),
        coverage_fraction=len(state.coverage) / n_free,
        goals_reached=reached, mean_goal_distance=mean_dist,
        lam=state.enc.lam, constraint_residual=mean_dss - 1.0,
        mean_tldr_reward=mean_raw, repr_loss=repr_loss,
        qg_loss=qg_loss, qe_loss=qe_loss, seed=cfg.seed)


# ---- evaluation ----------------------------------------------------------------

def evaluate(state: RunState, goal_set=None):
    """Greedy goal-reaching rollouts; side-effect free.

    A goal counts as reached iff the agent occupies the exact goal cell at
    any timestep. Mean goal distance averages the true step distance from
    the final cell to the goal.
    """
    spec = state.spec
    goals = list(goal_set) if goal_set is not None else list(spec.goals)
    if not goals:
        return 0, 0.0, []
    successes = []
    dists = []
    for goal in goals:
        goal_feat = env.featurize(spec, goal)
        s = env.reset(spec)
        reached = s.cell == tuple(goal)
        for _ in range(spec.horizon):
            x = np.concatenate([env.featurize(spec, s.cell), goal_feat])
            s = env.step(spec, s, agent.act(state.qg, x, "greedy"))
            reached = reached or s.cell == tuple(goal)
        successes.append(bool(reached))
        d = env.bfs_distance(spec, s.cell, tuple(goal))
        dists.append(float(d) if d is not None else float(spec.width * spec.height))
    return sum(successes), float(np.mean(dists)), successes


# ---- checkpointing -------------------------------------------------------------

RUN_MAGIC = b"TLDR"
RUN_VERSION = 1


def save_run(fh, state: RunState, layout_digest: bytes = b"\x00" * 16):
    fh.write(RUN_MAGIC)
    fh.write(struct.pack("<I", RUN_VERSION))
    fh.write(layout_digest[:16].ljust(16, b"\x00"))
    fh.write(struct.pack("<qq", state.epoch, state.env_steps))
    fh.write(struct.pack("<dq", state.norm.mean, state.norm.count))
    representation.save_encoder(fh, state.enc)
    agent.save_qpair(fh, state.qg)
    agent.save_qpair(fh, state.qe)


def load_run(fh, cfg: RunConfig, spec=None) -> tuple:
    """Rebuild a RunState (fresh buffer and rng) from a checkpoint.

    Returns (state, layout_digest) so callers can verify layout identity.
    """
    if fh.read(4) != RUN_MAGIC:
        raise ValueError("bad run checkpoint magic")
    (version,) = struct.unpack("<I", fh.read(4))
    if version != RUN_VERSION:
        raise ValueError(f"unsupported run checkpoint version {version}")
    digest = fh.read(16)
    epoch, env_steps = struct.unpack("<qq", fh.read(16))
    mean, count = struct.unpack("<dq", fh.read(16))
    state = init_run(cfg, spec=spec)
    state.enc = representation.load_encoder(fh)
    state.qg = agent.load_qpair(fh)
    state.qe = agent.load_qpair(fh)
    state.epoch = epoch
    state.env_steps = env_steps
    state.norm = rewards.RunningMean(mean=mean, count=count)
    return state, digest
