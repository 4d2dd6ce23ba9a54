import itertools

import numpy as np
import pytest

from tldrgrid import env

OPEN3 = "...\n...\nS..\n"  # 3x3 open, start bottom-left = (0, 0)

# corridor: manhattan distance between the two G cells is 2, path length 8
U_CORRIDOR = (
    "G#G\n"
    ".#.\n"
    ".#.\n"
    "S..\n"
)

WALL_ABOVE = (
    "...\n"
    ".#.\n"
    "S..\n"
)  # wall at (1, 1): moving up from (1, 0) is blocked


def test_parse_rejects_ragged_rows():
    with pytest.raises(env.LayoutError):
        env.parse_layout("..\n.\nS.")


def test_parse_rejects_multiple_starts():
    with pytest.raises(env.LayoutError):
        env.parse_layout("SS\n..")


def test_parse_rejects_missing_start():
    with pytest.raises(env.LayoutError):
        env.parse_layout("..\n..")


def test_reset_is_start_cell():
    spec = env.parse_layout(OPEN3)
    s = env.reset(spec)
    assert s.cell == (0, 0) and s.t == 0
    assert env.reset(spec) == s


def test_large_layout_reset():
    spec = env.load_layout("large")
    assert env.reset(spec).cell == spec.start
    assert not spec.is_wall(spec.start)


def test_step_free_move():
    spec = env.parse_layout(OPEN3)
    s = env.EnvState(cell=(1, 1), t=0)
    assert env.step(spec, s, 3).cell == (2, 1)  # right


def test_step_boundary_blocks_but_counts():
    spec = env.parse_layout(OPEN3)
    s = env.EnvState(cell=(0, 0), t=0)
    s2 = env.step(spec, s, 2)  # left
    assert s2.cell == (0, 0) and s2.t == 1


def test_step_wall_blocks():
    spec = env.parse_layout(WALL_ABOVE)
    s = env.EnvState(cell=(1, 0), t=0)
    assert env.step(spec, s, 0).cell == (1, 0)  # up into the wall at (1, 1)


def test_step_past_horizon_rejected():
    spec = env.parse_layout(OPEN3, horizon=1)
    s = env.step(spec, env.reset(spec), 3)
    with pytest.raises(env.EpisodeExhausted):
        env.step(spec, s, 3)


def test_step_is_pure():
    spec = env.parse_layout(OPEN3)
    s = env.EnvState(cell=(1, 1), t=3)
    a = env.step(spec, s, 0)
    b = env.step(spec, s, 0)
    assert a == b and s.t == 3


@pytest.mark.parametrize("cell,expected", [
    ((0, 0), (0.0, 0.0)),
    ((10, 10), (1.0, 1.0)),
    ((5, 2), (0.5, 0.2)),
])
def test_featurize_11x11(cell, expected):
    spec = env.load_layout("open")
    np.testing.assert_allclose(env.featurize(spec, cell), expected)


def test_bfs_identity():
    spec = env.parse_layout(OPEN3)
    assert env.bfs_distance(spec, (1, 1), (1, 1)) == 0


def test_bfs_open_grid_is_manhattan():
    spec = env.parse_layout(OPEN3)
    assert env.bfs_distance(spec, (0, 0), (2, 2)) == 4


def test_bfs_u_corridor():
    spec = env.parse_layout(U_CORRIDOR)
    # the two G cells (0, 3) and (2, 3) sit across a wall column
    assert env.bfs_distance(spec, (0, 3), (2, 3)) == 8


def test_bfs_rejects_wall_cells():
    spec = env.parse_layout(WALL_ABOVE)
    with pytest.raises(ValueError):
        env.bfs_distance(spec, (1, 1), (0, 0))


def test_bfs_symmetry_and_triangle_inequality():
    spec = env.parse_layout(U_CORRIDOR)
    free = spec.free_cells()
    dmap = {c: env.distance_map(spec, c) for c in free}
    for a, b in itertools.combinations(free, 2):
        assert dmap[a][b] == dmap[b][a]
    for a, b, c in itertools.islice(itertools.permutations(free, 3), 2000):
        assert dmap[a][c] <= dmap[a][b] + dmap[b][c]


def test_all_free_cells_reachable_in_bundled_layouts():
    for name in ("open", "large", "ultra"):
        spec = env.load_layout(name)
        dmap = env.distance_map(spec, spec.start)
        for cell in spec.free_cells():
            assert cell in dmap, f"{name}: {cell} unreachable"


def test_bundled_goal_sets():
    assert len(env.load_layout("large").goals) == 7
    assert len(env.load_layout("ultra").goals) == 21


def test_goals_within_horizon():
    for name in ("large", "ultra"):
        spec = env.load_layout(name)
        dmap = env.distance_map(spec, spec.start)
        assert max(dmap[g] for g in spec.goals) <= spec.horizon
