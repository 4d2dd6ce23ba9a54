"""Train the temporal-distance encoder alone and compare it with BFS.

Enumerates every legal one-step transition in the large spiral maze, trains
the encoder on uniform samples of them, and prints estimated-vs-true step
distances from the start cell at increasing depths. Shows the constraint
multiplier settling and the embedding distances tracking shortest-path
lengths.
"""

import numpy as np

from tldrgrid import env
from tldrgrid import representation as R

rng = np.random.default_rng(0)
spec = env.load_layout("large")

# every legal move (including wall bumps, which stay in place)
states, nexts = [], []
for cell in spec.free_cells():
    for dx, dy in env.ACTIONS:
        nxt = (cell[0] + dx, cell[1] + dy)
        if spec.is_wall(nxt):
            nxt = cell
        states.append(env.featurize(spec, cell))
        nexts.append(env.featurize(spec, nxt))
states = np.array(states)
nexts = np.array(nexts)

enc = R.init_encoder(2, dim=4, hidden=64, depth=2, lr=3e-3,
                     lam0=30.0, lam_lr=0.1, rng=rng)
for step in range(12_000):
    idx = rng.integers(states.shape[0], size=256)
    batch = R.make_repr_batch(states[idx], nexts[idx], rng)
    enc, loss, mean_step = R.repr_update(enc, batch)
    if (step + 1) % 1500 == 0:
        print(f"step {step + 1:5d}  loss {loss:9.3f}  lambda {enc.lam:7.1f}  "
              f"mean one-step distance {mean_step:.3f}")

bfs = env.distance_map(spec, spec.start)
cells = sorted(bfs, key=bfs.get)
print("\n  cell        bfs   estimate")
for cell in cells[::10]:
    est = R.temporal_distance(enc, env.featurize(spec, spec.start),
                              env.featurize(spec, cell))
    print(f"  {str(cell):10s}  {bfs[cell]:3d}   {est:7.2f}")
