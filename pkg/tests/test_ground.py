import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from agplan.energy import EnergyParams
from agplan.errors import ConfigError, ContractError
from agplan.ground import (EXHAUSTED, REACHED_GOAL, TAKEOFF_REQUIRED, MobilityLimits,
                           TakeoffDecision, _heuristic, dof_between, drive_cost, feasible_node,
                           path_energy, repair_ground_path, search_ground,
                           takeoff_decision_step)
from agplan.terrain import GridIndex, TerrainGrid, TerrainSpec, synthesize_terrain
from oracles.dijkstra import dijkstra_energy, energy_graph

EP = EnergyParams()
LIM = MobilityLimits()


def trailing_run(dofs, m_index):
    run = 0
    for d in dofs:
        run = run + 1 if d > m_index else 0
    return run


@given(st.lists(st.floats(0, 1, allow_nan=False), max_size=40))
def test_takeoff_flag_matches_run_length(dofs):
    state = TakeoffDecision()
    for i, d in enumerate(dofs):
        state = takeoff_decision_step(state, d, LIM, i)
        assert state.flag == (trailing_run(dofs[: i + 1], LIM.m_index) > 7)
        assert (state.trigger_node == i) == state.flag


def test_takeoff_boundaries():
    s = TakeoffDecision()
    for _ in range(7):
        s = takeoff_decision_step(s, 0.9, LIM)
    assert s.count == 7 and not s.flag
    s = takeoff_decision_step(s, 0.9, LIM)
    assert s.flag
    assert takeoff_decision_step(s, LIM.m_index, LIM).count == 0


def test_dof_components():
    z = np.zeros((3, 3))
    z[:, 2] = 6.0
    g = TerrainGrid(3, 3, 12.0, 0, 0, z)
    assert dof_between(g, (1, 1), (2, 1)) == pytest.approx(0.5)
    # moving along y next to a slope: cross-slope at the destination
    assert dof_between(g, (1, 0), (1, 1)) == pytest.approx(0.25)
    flat = synthesize_terrain(TerrainSpec(ncols=3, nrows=3))
    assert dof_between(flat, (0, 0), (1, 0), heading_prev=(-1, 0)) == pytest.approx(1.0)
    assert dof_between(flat, (0, 0), (1, 0), heading_prev=(0, 1)) == pytest.approx(0.5)
    with pytest.raises(ContractError):
        dof_between(flat, (0, 0), (2, 0))


def test_feasible_node():
    g = synthesize_terrain(TerrainSpec(kind="ridge", ncols=12, nrows=3, amplitude=30, ridge_col=6))
    assert feasible_node(g, (1, 1), LIM)
    assert not feasible_node(g, (6, 1), LIM)
    assert not feasible_node(g, (-1, 1), LIM)


def test_limits_validation():
    with pytest.raises(ConfigError):
        MobilityLimits(gx_min=0.5, gx_max=0.1)
    with pytest.raises(ConfigError):
        MobilityLimits(heuristic_weight=1.5)


def test_flat_straight_line_closed_form():
    g = synthesize_terrain(TerrainSpec(ncols=10, nrows=3))
    res = search_ground(g, (0, 1), (9, 1), LIM, EP)
    assert res.outcome == REACHED_GOAL
    assert len(res.partial_path) == 10
    assert res.energy == pytest.approx(9 * 100 + EP.drive_energy_per_meter * 9 * 12, rel=1e-12)
    assert res.h2d_min == 0


def test_start_equals_goal():
    g = synthesize_terrain(TerrainSpec(ncols=4, nrows=4))
    res = search_ground(g, (1, 1), (1, 1), LIM, EP)
    assert res.outcome == REACHED_GOAL and res.partial_path == [(1, 1)] and res.energy == 0


def test_infeasible_endpoints_rejected():
    g = synthesize_terrain(TerrainSpec(kind="ridge", ncols=12, nrows=3, amplitude=30, ridge_col=6))
    with pytest.raises(ContractError):
        search_ground(g, (0, 1), (6, 1), LIM, EP)


def test_wall_exhausts():
    g = synthesize_terrain(TerrainSpec(kind="ridge", ncols=12, nrows=3, amplitude=30, ridge_col=6))
    res = search_ground(g, (0, 1), (11, 1), LIM, EP)
    assert res.outcome == EXHAUSTED and res.partial_path == []
    assert res.closest_node.col == 4
    assert res.h2d_min == (11 - 4) * 12


def test_sloped_flank_triggers_takeoff(ridge_scenario):
    g = ridge_scenario.grid()
    limits = ridge_scenario.config().limits
    res = search_ground(g, ridge_scenario.start, ridge_scenario.goal, limits, EP)
    assert res.outcome == TAKEOFF_REQUIRED
    assert res.switching_point == res.partial_path[-1]
    # eight consecutive flank moves, the first starting at the flank foot
    assert res.switching_point.col == 17


@pytest.mark.parametrize("seed", range(15))
def test_matches_dijkstra_with_obstacles(seed):
    g = synthesize_terrain(TerrainSpec(kind="random-smooth", ncols=15, nrows=15, amplitude=60,
                                       seed=seed))
    cells = [(c, r) for r in range(15) for c in range(15) if feasible_node(g, (c, r), LIM)]
    rng = np.random.default_rng(seed)
    s, t = (cells[i] for i in rng.choice(len(cells), 2, replace=False))
    G = energy_graph(g, EP, LIM)
    res = search_ground(g, s, t, LIM, EP, use_takeoff=False)
    import networkx as nx
    if nx.has_path(G, s, t):
        assert res.outcome == REACHED_GOAL
        assert res.energy == pytest.approx(dijkstra_energy(g, EP, LIM, s, t), rel=1e-12)
        assert res.energy == pytest.approx(path_energy(g, EP, res.partial_path), rel=1e-12)
    else:
        assert res.outcome == EXHAUSTED


@given(st.integers(0, 19), st.integers(0, 19), st.integers(0, 19), st.integers(0, 19),
       st.integers(0, 5))
def test_heuristic_admissible(c0, r0, c1, r1, seed):
    g = synthesize_terrain(TerrainSpec(kind="random-smooth", ncols=20, nrows=20, amplitude=15,
                                       seed=seed))
    res = search_ground(g, (c0, r0), (c1, r1), LIM, EP, use_takeoff=False)
    assert _heuristic(g, EP, LIM, (c0, r0), (c1, r1)) <= res.energy + 1e-9


def test_repair_ground_path():
    g = synthesize_terrain(TerrainSpec(ncols=10, nrows=5))
    res = search_ground(g, (0, 2), (9, 2), LIM, EP)
    path = res.partial_path
    assert repair_ground_path(g, path, (4, 2), LIM, EP) == path[:5]
    repaired = repair_ground_path(g, path, (6, 4), LIM, EP)
    assert repaired[-1] == (6, 4) and repaired[0] == (0, 2)
    for a, b in zip(repaired, repaired[1:]):
        assert max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1


def test_drive_cost_is_3d():
    z = np.array([[0.0, 5.0], [0.0, 5.0]])
    g = TerrainGrid(2, 2, 12.0, 0, 0, z)
    assert drive_cost(g, EP, (0, 0), (1, 0)) == pytest.approx(100 + EP.drive_energy_per_meter * 13)
