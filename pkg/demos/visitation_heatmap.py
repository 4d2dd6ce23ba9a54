"""Short training run on the large maze with an ASCII visitation heatmap.

The exploration ratchet is visible directly in the terminal: visit counts
spread down the spiral corridor as epochs pass. Walls print as '#', unvisited
free cells as '.', visited cells as a log-scaled digit.
"""

import numpy as np

from tldrgrid import controller
from tldrgrid.config import RunConfig


def ascii_heatmap(state):
    rows = []
    for y in reversed(range(state.spec.height)):
        row = []
        for x in range(state.spec.width):
            if state.spec.is_wall((x, y)):
                row.append("#")
            else:
                c = state.visit_counts.get((x, y), 0)
                row.append("." if c == 0 else str(min(9, int(np.log10(c) * 3))))
        rows.append("".join(row))
    return "\n".join(rows)


cfg = RunConfig(layout="large", epochs=60, seed=0)
state = controller.init_run(cfg)
for epoch in range(cfg.epochs):
    row = controller.train_epoch(state)
    if (epoch + 1) % 20 == 0:
        print(f"\nafter epoch {row.epoch}: coverage {row.coverage_cells} cells")
        print(ascii_heatmap(state))
