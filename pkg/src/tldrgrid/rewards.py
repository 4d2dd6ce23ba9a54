"""Reward signals: kNN particle-entropy novelty, exploration, goal-conditioned.

The novelty ("TLDR") reward of a state is log(1 + mean distance to its k
nearest neighbors among reference embeddings). The exploration reward is
the normalized difference of novelty before and after a step. The
goal-conditioned reward is the decrease in estimated temporal distance
to the goal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from . import representation as repr_mod


class NotEnoughReferences(ValueError):
    """k exceeds the number of usable reference embeddings."""


@dataclass
class RunningMean:
    """Running mean of observed novelty rewards, used as a normalizer."""
    mean: float = 0.0
    count: int = 0

    @property
    def divisor(self) -> float:
        return self.mean if self.count > 0 and self.mean > 0 else 1.0

    def update(self, values):
        values = np.atleast_1d(np.asarray(values, dtype=np.float64))
        for v in values.ravel():
            self.count += 1
            self.mean += (float(v) - self.mean) / self.count


def tldr_rewards(queries: np.ndarray, ref: np.ndarray, k: int,
                 exclude_index=None) -> np.ndarray:
    """Novelty reward for each query embedding against a reference batch.

    exclude_index: optional array mapping query row -> its own row in `ref`,
    removed from the neighborhood so a query never counts itself.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    ref = np.asarray(ref, dtype=np.float64)
    avail = ref.shape[0] - (0 if exclude_index is None else 1)
    if k < 1 or k > avail:
        raise NotEnoughReferences(f"k={k} with {avail} usable references")
    dists = cdist(queries, ref)
    if exclude_index is not None:
        dists[np.arange(queries.shape[0]), np.asarray(exclude_index)] = np.inf
    # kth-smallest selection, then an ascending sum over the k chosen
    part = np.partition(dists, k - 1, axis=1)[:, :k]
    part.sort(axis=1)
    mean_dist = np.add.reduce(part, axis=1) / k
    return np.log1p(mean_dist)


def tldr_reward(z, ref, k: int, exclude_index=None) -> float:
    """Scalar novelty reward of a single embedding."""
    excl = None if exclude_index is None else np.array([exclude_index])
    return float(tldr_rewards(np.atleast_2d(z), ref, k, exclude_index=excl)[0])


def exploration_rewards_detail(s, sp, enc, ref_embeddings, k: int,
                               norm: RunningMean, update_norm: bool = True):
    """Normalized novelty gain of each transition plus the raw novelty terms.

    Both novelty terms are divided by the current running-mean estimate;
    the estimate is then updated with both raw observations.
    """
    z_s = repr_mod.embed(enc, np.atleast_2d(s))
    z_sp = repr_mod.embed(enc, np.atleast_2d(sp))
    r_s = tldr_rewards(z_s, ref_embeddings, k)
    r_sp = tldr_rewards(z_sp, ref_embeddings, k)
    div = norm.divisor
    out = r_sp / div - r_s / div
    if update_norm:
        norm.update(np.concatenate([r_s, r_sp]))
    return out, r_s, r_sp


def exploration_rewards(s, sp, enc, ref_embeddings, k: int,
                        norm: RunningMean, update_norm: bool = True) -> np.ndarray:
    out, _, _ = exploration_rewards_detail(s, sp, enc, ref_embeddings, k, norm,
                                           update_norm=update_norm)
    return out


def exploration_reward(s, sp, enc, ref_embeddings, k: int,
                       norm: RunningMean, update_norm: bool = True) -> float:
    return float(exploration_rewards(s, sp, enc, ref_embeddings, k, norm,
                                     update_norm=update_norm)[0])


def gcrl_rewards(s, sp, g, enc) -> np.ndarray:
    """Decrease in embedding distance to the goal: ||phi(s)-phi(g)|| - ||phi(s')-phi(g)||."""
    z_s = repr_mod.embed(enc, np.atleast_2d(s))
    z_sp = repr_mod.embed(enc, np.atleast_2d(sp))
    z_g = repr_mod.embed(enc, np.atleast_2d(g))
    return (np.linalg.norm(z_s - z_g, axis=-1)
            - np.linalg.norm(z_sp - z_g, axis=-1))


def gcrl_reward(s, sp, g, enc) -> float:
    return float(gcrl_rewards(s, sp, g, enc)[0])
