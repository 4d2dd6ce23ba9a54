"""Bounded transition store with trajectory bookkeeping and hindsight relabeling.

Records of a trajectory are inserted consecutively in timestep order, so a
trajectory always occupies a contiguous region of storage. Eviction drops
whole trajectories from the oldest end, never fragments.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

EP_GOAL = 0
EP_EXPLORE = 1


class EmptyBuffer(RuntimeError):
    pass


@dataclass(frozen=True)
class TransitionRecord:
    s: np.ndarray          # (in_dim,) features
    a: int
    sp: np.ndarray
    traj_id: int
    t: int
    traj_len: int
    goal: np.ndarray
    ep_type: int           # EP_GOAL or EP_EXPLORE
    s_cell: tuple = None
    sp_cell: tuple = None
    goal_cell: tuple = None


class ReplayBuffer:
    def __init__(self, capacity: int = 100_000, in_dim: int = 2):
        self.capacity = int(capacity)
        self.in_dim = in_dim
        self._alloc = 0
        self._head = 0
        self._tail = 0
        self._starts = {}          # traj_id -> storage position of timestep 0
        self._grow(min(4096, self.capacity + 1))

    def _grow(self, new_alloc):
        def resize(name, shape, dtype):
            new = np.zeros(shape, dtype=dtype)
            if self._alloc:
                old = getattr(self, name)
                new[: self._tail] = old[: self._tail]
            setattr(self, name, new)

        resize("S", (new_alloc, self.in_dim), np.float64)
        resize("SP", (new_alloc, self.in_dim), np.float64)
        resize("GOAL", (new_alloc, self.in_dim), np.float64)
        resize("A", (new_alloc,), np.int64)
        resize("TRAJ", (new_alloc,), np.int64)
        resize("T", (new_alloc,), np.int64)
        resize("LEN", (new_alloc,), np.int64)
        resize("TYPE", (new_alloc,), np.int64)
        resize("S_CELL", (new_alloc, 2), np.int64)
        resize("SP_CELL", (new_alloc, 2), np.int64)
        resize("GOAL_CELL", (new_alloc, 2), np.int64)
        self._alloc = new_alloc

    def __len__(self):
        return self._tail - self._head

    @property
    def trajectory_ids(self):
        return sorted(self._starts)

    def _compact(self):
        n = len(self)
        for name in ("S", "SP", "GOAL", "A", "TRAJ", "T", "LEN", "TYPE",
                     "S_CELL", "SP_CELL", "GOAL_CELL"):
            arr = getattr(self, name)
            arr[:n] = arr[self._head : self._tail]
        shift = self._head
        self._starts = {tid: pos - shift for tid, pos in self._starts.items()}
        self._head = 0
        self._tail = n

    def insert(self, rec: TransitionRecord):
        if rec.t >= rec.traj_len:
            raise ValueError("record timestep past its trajectory length")
        if self._tail == self._alloc:
            if self._head > 0:
                self._compact()
            else:
                self._grow(min(self._alloc * 2, self.capacity + rec.traj_len + 1))
        if rec.traj_id in self._starts:
            prev = self._tail - 1
            if self.TRAJ[prev] != rec.traj_id or self.T[prev] + 1 != rec.t:
                raise ValueError("trajectory records must arrive consecutively")
        else:
            if rec.t != 0:
                raise ValueError("new trajectory must start at timestep 0")
            self._starts[rec.traj_id] = self._tail
        i = self._tail
        self.S[i] = rec.s
        self.SP[i] = rec.sp
        self.GOAL[i] = rec.goal
        self.A[i] = rec.a
        self.TRAJ[i] = rec.traj_id
        self.T[i] = rec.t
        self.LEN[i] = rec.traj_len
        self.TYPE[i] = rec.ep_type
        self.S_CELL[i] = rec.s_cell if rec.s_cell is not None else (0, 0)
        self.SP_CELL[i] = rec.sp_cell if rec.sp_cell is not None else (0, 0)
        self.GOAL_CELL[i] = rec.goal_cell if rec.goal_cell is not None else (0, 0)
        self._tail += 1
        self._evict()

    def _evict(self):
        while len(self) > self.capacity:
            head_id = self.TRAJ[self._head]
            if head_id == self.TRAJ[self._tail - 1]:
                break  # never evict the trajectory currently being written
            end = self._head
            while end < self._tail and self.TRAJ[end] == head_id:
                end += 1
            del self._starts[int(head_id)]
            self._head = end

    def _record_at(self, i: int) -> TransitionRecord:
        return TransitionRecord(
            s=self.S[i].copy(), a=int(self.A[i]), sp=self.SP[i].copy(),
            traj_id=int(self.TRAJ[i]), t=int(self.T[i]), traj_len=int(self.LEN[i]),
            goal=self.GOAL[i].copy(), ep_type=int(self.TYPE[i]),
            s_cell=tuple(self.S_CELL[i]), sp_cell=tuple(self.SP_CELL[i]),
            goal_cell=tuple(self.GOAL_CELL[i]))

    def future_records(self, traj_id: int, t: int):
        """All records of `traj_id` with timestep >= t, in order."""
        start = self._starts[traj_id]
        out = []
        i = start + t
        while i < self._tail and self.TRAJ[i] == traj_id:
            out.append(self._record_at(i))
            i += 1
        return out

    def sample_indices(self, n: int, rng) -> np.ndarray:
        if len(self) == 0:
            raise EmptyBuffer("cannot sample from an empty buffer")
        return rng.integers(self._head, self._tail, size=n)

    def sample_recent_indices(self, n: int, rng, window: int) -> np.ndarray:
        """n positions drawn uniformly from the newest `window` records."""
        if len(self) == 0:
            raise EmptyBuffer("cannot sample from an empty buffer")
        lo = max(self._head, self._tail - window)
        return rng.integers(lo, self._tail, size=n)

    def sample_minibatch(self, n: int, rng):
        """n records drawn uniformly with replacement."""
        return [self._record_at(i) for i in self.sample_indices(n, rng)]

    def distinct_transitions(self):
        """Feature arrays (S, SP) of the distinct (s_cell, sp_cell) pairs held.

        Deduplicating removes visitation skew: every transition of the
        explored region carries equal weight regardless of how often it was
        replayed into the buffer.
        """
        if len(self) == 0:
            raise EmptyBuffer("cannot deduplicate an empty buffer")
        both = np.concatenate([self.S_CELL[self._head:self._tail],
                               self.SP_CELL[self._head:self._tail]], axis=1)
        _, idx = np.unique(both, axis=0, return_index=True)
        return (self.S[self._head:self._tail][idx].copy(),
                self.SP[self._head:self._tail][idx].copy())

    # ---- hindsight relabeling ----------------------------------------------

    def her_relabel_indices(self, idx: np.ndarray, rng, p_future: float = 0.8):
        """Relabeled goal features (and cells) for buffer positions `idx`.

        With probability p_future the goal becomes the state observed at a
        timestep t' drawn uniformly from [t, traj_len - 1] of the same
        trajectory (the next-state of transition t', i.e. a strictly later
        observation); otherwise the stored episode goal is kept.
        """
        idx = np.asarray(idx)
        t = self.T[idx]
        length = self.LEN[idx]
        relabel = rng.random(idx.shape[0]) < p_future
        tp = t + (rng.random(idx.shape[0]) * (length - t)).astype(np.int64)
        future_pos = idx - t + tp
        goals = self.GOAL[idx].copy()
        goal_cells = self.GOAL_CELL[idx].copy()
        goals[relabel] = self.SP[future_pos[relabel]]
        goal_cells[relabel] = self.SP_CELL[future_pos[relabel]]
        return goals, goal_cells, relabel, tp

    def her_relabel(self, batch, rng, p_future: float = 0.8):
        """Record-level relabeling; evicted trajectories are resampled."""
        out = []
        for rec in batch:
            while rec.traj_id not in self._starts:
                rec = self._record_at(int(self.sample_indices(1, rng)[0]))
            if rng.random() < p_future:
                tp = int(rng.integers(rec.t, rec.traj_len))
                pos = self._starts[rec.traj_id] + tp
                rec = replace(rec, goal=self.SP[pos].copy(),
                              goal_cell=tuple(self.SP_CELL[pos]))
            out.append(rec)
        return out
