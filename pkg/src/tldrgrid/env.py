"""Discrete maze environments with full-state goals and a BFS distance oracle.

Coordinates: x grows rightward, y grows upward. Layout text files list the
top row first, so line i of the file is row y = height - 1 - i.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from importlib import resources

import numpy as np

# action indices: 0 up, 1 down, 2 left, 3 right
ACTIONS = ((0, 1), (0, -1), (-1, 0), (1, 0))
ACTION_NAMES = ("up", "down", "left", "right")
N_ACTIONS = 4


class LayoutError(ValueError):
    """Malformed maze layout text."""


class EpisodeExhausted(RuntimeError):
    """step() called past the episode horizon."""


@dataclass(frozen=True)
class MazeSpec:
    width: int
    height: int
    walls: frozenset          # set of (x, y) wall cells
    start: tuple
    horizon: int
    goals: tuple = ()         # evaluation goal cells

    def is_wall(self, cell):
        x, y = cell
        return (x < 0 or x >= self.width or y < 0 or y >= self.height
                or (x, y) in self.walls)

    def free_cells(self):
        return [(x, y) for x in range(self.width) for y in range(self.height)
                if (x, y) not in self.walls]


@dataclass(frozen=True)
class EnvState:
    cell: tuple
    t: int = 0


def parse_layout(text: str, horizon: int = 100) -> MazeSpec:
    """Parse the maze text format: `#` wall, `.` free, `S` start, `G` goal."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise LayoutError("empty layout")
    width = len(lines[0])
    height = len(lines)
    walls = set()
    start = None
    goals = []
    for i, line in enumerate(lines):
        if len(line) != width:
            raise LayoutError(f"ragged row {i}: width {len(line)} != {width}")
        y = height - 1 - i
        for x, ch in enumerate(line):
            if ch == "#":
                walls.add((x, y))
            elif ch == "S":
                if start is not None:
                    raise LayoutError("multiple start cells")
                start = (x, y)
            elif ch == "G":
                goals.append((x, y))
            elif ch != ".":
                raise LayoutError(f"unknown character {ch!r} at row {i}")
    if start is None:
        raise LayoutError("no start cell")
    if horizon < 1:
        raise LayoutError("horizon must be >= 1")
    # goals listed in reading order of the file
    return MazeSpec(width=width, height=height, walls=frozenset(walls),
                    start=start, horizon=horizon, goals=tuple(goals))


def load_layout(name_or_path: str, horizon=None) -> MazeSpec:
    """Load a bundled layout by name ("open", "large", "ultra") or a file path."""
    defaults = {"open": 100, "large": 100, "ultra": 150}
    if name_or_path in defaults:
        text = resources.files("tldrgrid.layouts").joinpath(
            name_or_path + ".maze").read_text()
        h = horizon if horizon is not None else defaults[name_or_path]
    else:
        with open(name_or_path) as fh:
            text = fh.read()
        h = horizon if horizon is not None else 100
    return parse_layout(text, horizon=h)


def reset(spec: MazeSpec) -> EnvState:
    return EnvState(cell=spec.start, t=0)


def step(spec: MazeSpec, state: EnvState, action: int) -> EnvState:
    """Move one cell unless blocked; the step counter always advances."""
    if state.t >= spec.horizon:
        raise EpisodeExhausted(f"t={state.t} >= horizon {spec.horizon}")
    dx, dy = ACTIONS[action]
    nxt = (state.cell[0] + dx, state.cell[1] + dy)
    if spec.is_wall(nxt):
        nxt = state.cell
    return EnvState(cell=nxt, t=state.t + 1)


def featurize(spec: MazeSpec, cell) -> np.ndarray:
    """Normalized (x, y) in [0, 1]^2."""
    return np.array([cell[0] / (spec.width - 1), cell[1] / (spec.height - 1)],
                    dtype=np.float64)


def featurize_cells(spec: MazeSpec, cells) -> np.ndarray:
    arr = np.asarray(cells, dtype=np.float64)
    return arr / np.array([spec.width - 1, spec.height - 1], dtype=np.float64)


def distance_map(spec: MazeSpec, source) -> dict:
    """BFS distances from `source` to every reachable free cell."""
    if spec.is_wall(source):
        raise ValueError(f"source {source} is a wall or out of bounds")
    dist = {source: 0}
    queue = deque([source])
    while queue:
        cell = queue.popleft()
        for dx, dy in ACTIONS:
            nxt = (cell[0] + dx, cell[1] + dy)
            if not spec.is_wall(nxt) and nxt not in dist:
                dist[nxt] = dist[cell] + 1
                queue.append(nxt)
    return dist


def bfs_distance(spec: MazeSpec, a, b):
    """Shortest number of env steps from a to b, or None if unreachable."""
    if spec.is_wall(a):
        raise ValueError(f"cell {a} is a wall or out of bounds")
    if spec.is_wall(b):
        raise ValueError(f"cell {b} is a wall or out of bounds")
    return distance_map(spec, a).get(b)
