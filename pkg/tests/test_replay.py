import numpy as np
import pytest
from scipy import stats

from tldrgrid.replay import (EP_EXPLORE, EP_GOAL, EmptyBuffer, ReplayBuffer,
                             TransitionRecord)


def make_record(traj_id, t, traj_len, value=None, ep_type=EP_GOAL):
    v = float(traj_id * 1000 + t) if value is None else value
    return TransitionRecord(
        s=np.array([v, v]), a=t % 4, sp=np.array([v + 1, v + 1]),
        traj_id=traj_id, t=t, traj_len=traj_len,
        goal=np.array([-1.0, -1.0]), ep_type=ep_type,
        s_cell=(t, 0), sp_cell=(t + 1, 0), goal_cell=(9, 9))


def fill_trajectory(buf, traj_id, length, ep_type=EP_GOAL):
    for t in range(length):
        buf.insert(make_record(traj_id, t, length, ep_type=ep_type))


def test_empty_buffer_raises():
    buf = ReplayBuffer(capacity=10)
    assert len(buf) == 0
    with pytest.raises(EmptyBuffer):
        buf.sample_minibatch(1, np.random.default_rng(0))


def test_insert_and_roundtrip():
    buf = ReplayBuffer(capacity=100)
    fill_trajectory(buf, 7, 5)
    assert len(buf) == 5
    recs = buf.future_records(7, 0)
    assert [r.t for r in recs] == [0, 1, 2, 3, 4]
    assert recs[3].s[0] == pytest.approx(7003.0)
    assert recs[3].sp_cell == (4, 0)
    assert recs[3].a == 3


def test_insert_rejects_gaps_and_bad_starts():
    buf = ReplayBuffer(capacity=100)
    with pytest.raises(ValueError):
        buf.insert(make_record(1, 2, 5))  # new trajectory must start at t=0
    buf.insert(make_record(1, 0, 5))
    with pytest.raises(ValueError):
        buf.insert(make_record(1, 2, 5))  # skipped t=1
    with pytest.raises(ValueError):
        buf.insert(make_record(2, 3, 3))  # t beyond trajectory length


def test_eviction_drops_whole_oldest_trajectories():
    buf = ReplayBuffer(capacity=25)
    for tid in range(5):
        fill_trajectory(buf, tid, 10)
    # 50 inserted with capacity 25: only whole trajectories remain
    assert len(buf) <= 25
    assert len(buf) % 10 == 0
    kept = buf.trajectory_ids
    assert kept == [3, 4]
    # the oldest present trajectory is fully intact
    assert [r.t for r in buf.future_records(kept[0], 0)] == list(range(10))


def test_eviction_never_splits_current_trajectory():
    buf = ReplayBuffer(capacity=8)
    fill_trajectory(buf, 0, 6)
    fill_trajectory(buf, 1, 20)  # single trajectory larger than capacity
    assert buf.trajectory_ids == [1]
    assert [r.t for r in buf.future_records(1, 0)] == list(range(20))


def test_compaction_preserves_contents():
    buf = ReplayBuffer(capacity=30)
    for tid in range(20):
        fill_trajectory(buf, tid, 10)
    for tid in buf.trajectory_ids:
        recs = buf.future_records(tid, 0)
        assert [r.t for r in recs] == list(range(10))
        assert all(r.s[0] == pytest.approx(tid * 1000 + r.t) for r in recs)


def test_sampling_uniformity_chi_square():
    buf = ReplayBuffer(capacity=1000)
    for tid in range(5):
        fill_trajectory(buf, tid, 8)  # 40 live records
    rng = np.random.default_rng(123)
    counts = np.zeros(40)
    idx = buf.sample_indices(40 * 500, rng)
    for i in idx:
        counts[i - buf._head] += 1
    _, p = stats.chisquare(counts)
    assert p > 1e-3


def test_her_keep_fraction():
    buf = ReplayBuffer(capacity=100_000)
    for tid in range(20):
        fill_trajectory(buf, tid, 100)
    rng = np.random.default_rng(0)
    idx = buf.sample_indices(50_000, rng)
    _, _, relabel, _ = buf.her_relabel_indices(idx, rng, p_future=0.8)
    frac = relabel.mean()
    assert 0.78 <= frac <= 0.82


def test_her_relabeled_goal_is_strictly_future_observation():
    buf = ReplayBuffer(capacity=100_000)
    for tid in range(10):
        fill_trajectory(buf, tid, 50)
    rng = np.random.default_rng(1)
    idx = buf.sample_indices(20_000, rng)
    goals, goal_cells, relabel, tp = buf.her_relabel_indices(idx, rng)
    t = buf.T[idx]
    length = buf.LEN[idx]
    assert np.all(tp[relabel] >= t[relabel])
    assert np.all(tp[relabel] <= length[relabel] - 1)
    # relabeled goal equals the next-state recorded at t' of the same trajectory
    pos = idx - t + tp
    assert np.array_equal(goals[relabel], buf.SP[pos[relabel]])
    assert np.array_equal(goal_cells[relabel], buf.SP_CELL[pos[relabel]])
    # untouched rows keep the stored episode goal
    assert np.array_equal(goals[~relabel], buf.GOAL[idx[~relabel]])


def test_her_future_timestep_covers_full_range():
    buf = ReplayBuffer(capacity=1000)
    fill_trajectory(buf, 0, 10)
    rng = np.random.default_rng(2)
    idx = np.zeros(5000, dtype=np.int64) + buf._starts[0]  # always timestep 0
    _, _, relabel, tp = buf.her_relabel_indices(idx, rng)
    seen = set(tp[relabel].tolist())
    assert seen == set(range(10))


def test_her_record_level_matches_semantics():
    buf = ReplayBuffer(capacity=1000)
    fill_trajectory(buf, 0, 30)
    rng = np.random.default_rng(3)
    batch = buf.sample_minibatch(200, rng)
    out = buf.her_relabel(batch, rng, p_future=1.0)
    for rec in out:
        # goal must be some observation at or after the record's own next step
        future = buf.future_records(rec.traj_id, rec.t)
        assert any(np.array_equal(rec.goal, f.sp) for f in future)


def test_episode_type_preserved():
    buf = ReplayBuffer(capacity=100)
    fill_trajectory(buf, 0, 5, ep_type=EP_GOAL)
    fill_trajectory(buf, 1, 5, ep_type=EP_EXPLORE)
    assert all(r.ep_type == EP_GOAL for r in buf.future_records(0, 0))
    assert all(r.ep_type == EP_EXPLORE for r in buf.future_records(1, 0))


def test_recent_sampling_stays_in_window():
    buf = ReplayBuffer(capacity=1000)
    for tid in range(20):
        fill_trajectory(buf, tid, 10)
    rng = np.random.default_rng(4)
    idx = buf.sample_recent_indices(500, rng, window=30)
    # newest 30 records are the last 3 trajectories
    assert idx.min() >= len(buf) - 30
    assert idx.max() < len(buf)
    assert set(np.unique(buf.TRAJ[idx])) <= {17, 18, 19}


def test_recent_sampling_window_larger_than_buffer():
    buf = ReplayBuffer(capacity=1000)
    fill_trajectory(buf, 0, 10)
    rng = np.random.default_rng(5)
    idx = buf.sample_recent_indices(200, rng, window=10_000)
    assert idx.min() >= 0 and idx.max() < len(buf)
    assert len(np.unique(idx)) == 10
