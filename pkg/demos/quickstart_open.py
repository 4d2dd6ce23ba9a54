"""Quickstart: train on the open room for a few epochs and evaluate.

Runs the full loop (representation, goal selection, both policies) through
the library API and prints the coverage curve, then evaluates the goal
policy on the layout's goal set. Takes about a minute on one core.
"""

import numpy as np

from tldrgrid import controller, env
from tldrgrid.config import RunConfig

cfg = RunConfig(layout="open", epochs=30, seed=0)
state = controller.init_run(cfg)
n_free = len(env.distance_map(state.spec, state.spec.start))

print(f"layout=open  free cells={n_free}  horizon={state.spec.horizon}")
for epoch in range(cfg.epochs):
    row = controller.train_epoch(state)
    if (epoch + 1) % 5 == 0:
        print(f"epoch {row.epoch:3d}  coverage {row.coverage_cells}/{n_free}"
              f"  lambda {row.lam:7.1f}  goals reached {row.goals_reached}")

reached, mean_dist, successes = controller.evaluate(state)
print(f"\nfinal greedy evaluation: {reached}/{len(successes)} goals reached, "
      f"mean remaining distance {mean_dist:.2f}")
print("per-goal success:", np.array(successes, dtype=int).tolist())
