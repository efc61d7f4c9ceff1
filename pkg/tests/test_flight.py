import math

import numpy as np
import pytest

from agplan.energy import BatteryState, EnergyParams, debit
from agplan.errors import ConfigError, ContractError
from agplan.flight import (BATTERY_LIMIT_LANDING, DIRECT, ESCAPE, ESCAPE_MODE, LANDED, LANDING,
                           NO_PATH, REACHED_GOAL, STAGE_ORDER, TAKEOFF, FlightParams,
                           TrapEscapeState, VoxelSpace, fly_cost, repair_flight_tail,
                           search_flight_direct, search_flight_escape, select_flight_mode,
                           stage_for, trap_escape_heuristic)
from agplan.ground import MobilityLimits, feasible_node
from agplan.terrain import TerrainGrid, TerrainSpec, synthesize_terrain

EP = EnergyParams()
PARAMS = FlightParams(c_escape=24.0, c_landing=120.0, epsilon=6.0, z_ceiling=200.0,
                      near_goal_radius=180.0, voxel_size=12.0)


def wall_grid():
    return synthesize_terrain(TerrainSpec(kind="ridge", ncols=30, nrows=9, amplitude=48.0,
                                          ridge_col=14, crest_width=2))


def test_stage_boundaries():
    d = 1e-9
    assert stage_for(0, PARAMS) == TAKEOFF
    assert stage_for(24.0 - d, PARAMS) == TAKEOFF
    assert stage_for(24.0, PARAMS) == ESCAPE
    assert stage_for(120.0 - d, PARAMS) == ESCAPE
    assert stage_for(120.0, PARAMS) == LANDING


def test_heuristic_updates_running_max():
    s = TrapEscapeState(h2d0=100.0, h2d=130.0)
    h = trap_escape_heuristic(s, z_curr=50.0, z_ground=10.0, params=PARAMS)
    assert s.h2d0 == 130.0 and s.stage == TAKEOFF
    assert s.z_dummy == 56.0
    assert h == 130.0 + 6.0


def test_soc_override_forces_ground():
    b = debit(BatteryState(q_capacity=1000.0, q_initial=1000.0, soc_ref=0.1).takeoff(), 200.0)
    s = TrapEscapeState(h2d0=100.0, h2d=100.0)
    h = trap_escape_heuristic(s, 50.0, 10.0, PARAMS, b)
    assert s.soc_override and s.stage == LANDING and s.z_dummy == 10.0
    assert h == 100.0 + 40.0


def test_params_resolve_and_validate():
    g = wall_grid()
    p = FlightParams().resolve(g)
    assert (p.c_escape, p.c_landing, p.voxel_size, p.epsilon) == (24.0, 120.0, 12.0, 6.0)
    assert p.z_ceiling == 48.0 + 36.0
    with pytest.raises(ConfigError):
        FlightParams(c_escape=50.0, c_landing=50.0).resolve(g)
    with pytest.raises(ConfigError):
        FlightParams(z_ceiling=40.0).resolve(g)
    with pytest.raises(ConfigError):
        FlightParams().validate()


def test_mode_selection():
    assert select_flight_mode(180.0, PARAMS) == DIRECT
    assert select_flight_mode(181.0, PARAMS) == ESCAPE_MODE


def test_voxel_space_surface_pinning():
    z = np.array([[5.0, 13.0], [0.0, 30.0]])
    g = TerrainGrid(2, 2, 12.0, 0, 0, z)
    space = VoxelSpace(g, PARAMS)
    assert space.surface_node((0, 0)) == (0, 0, 1)
    assert space.altitude((0, 0, 1)) == 5.0
    assert space.altitude((0, 0, 2)) == 24.0
    assert space.altitude(space.surface_node((1, 1))) == 30.0
    assert not space.allowed(0, 0, 0)
    assert not space.allowed(0, 0, 17)
    assert len(list(space.neighbors((0, 0, 1)))) > 0


def test_direct_flight_reaches_goal_above_terrain():
    g = wall_grid()
    p = FlightParams().resolve(g)
    res = search_flight_direct(g, (10, 4), (20, 4), p, EP)
    assert res.outcome == REACHED_GOAL
    assert res.path[-1][:2] == (20, 4)
    for (x, y, z), node in zip(res.positions, res.path):
        assert z >= g.elevations[node[1], node[0]]
    assert res.energy == pytest.approx(sum(fly_cost(VoxelSpace(g, p), EP, a, b)
                                           for a, b in zip(res.path, res.path[1:])))


def test_escape_crosses_wall_with_ordered_stages():
    g = wall_grid()
    p = FlightParams().resolve(g)
    res = search_flight_escape(g, (12, 4), (28, 4), 16 * 12.0, p, EP, BatteryState())
    assert res.outcome == LANDED
    assert res.landing_point.col > 15
    assert feasible_node(g, res.landing_point, MobilityLimits())
    order = [STAGE_ORDER[s] for s in res.stages]
    assert order == sorted(order)
    assert res.stages[0] == TAKEOFF and res.stages[-1] == LANDING
    for (x, y, z), node in zip(res.positions, res.path):
        assert z >= g.elevations[node[1], node[0]]


def test_escape_without_battery():
    g = wall_grid()
    p = FlightParams().resolve(g)
    res = search_flight_escape(g, (12, 4), (28, 4), 16 * 12.0, p, EP)
    assert res.outcome == LANDED and res.battery is None


def test_soc_budget_forces_early_landing():
    g = wall_grid()
    p = FlightParams().resolve(g)
    free = search_flight_escape(g, (12, 4), (28, 4), 16 * 12.0, p, EP)
    step = EP.fly_energy_per_meter * 12
    b = BatteryState(q_capacity=1e7, q_initial=1e7, soc_ref=0.05).takeoff()
    b = debit(b, 0.05 * 1e7 - 3 * step)
    res = search_flight_escape(g, (12, 4), (28, 4), 16 * 12.0, p, EP, b)
    assert res.outcome == BATTERY_LIMIT_LANDING
    assert feasible_node(g, res.landing_point, MobilityLimits())
    assert res.energy < free.energy


def test_emergency_descent_near_empty():
    g = wall_grid()
    p = FlightParams().resolve(g)
    b = BatteryState(q_capacity=1e7, q_initial=1e7, soc_ref=0.2)
    b = debit(b, 1e7 * 0.9 - 5 * EP.fly_energy_per_meter * 12).takeoff()
    res = search_flight_escape(g, (12, 4), (28, 4), 16 * 12.0, p, EP, b)
    assert res.outcome == BATTERY_LIMIT_LANDING
    space = VoxelSpace(g, p)
    assert space.is_surface(res.path[-1])
    assert feasible_node(g, res.landing_point, MobilityLimits())
    assert res.battery.soc >= 0


def test_no_path_when_boxed_in():
    g = wall_grid()
    p = FlightParams().resolve(g)
    tiny = BatteryState(q_capacity=1000.0, q_initial=1000.0, soc_ref=0.5)
    res = search_flight_direct(g, (2, 4), (28, 4), p, EP, tiny)
    assert res.outcome == NO_PATH


def test_bad_start_rejected():
    g = wall_grid()
    p = FlightParams().resolve(g)
    with pytest.raises(ContractError):
        search_flight_direct(g, (40, 4), (28, 4), p, EP)


def test_repair_flight_tail():
    g = wall_grid()
    p = FlightParams().resolve(g)
    res = search_flight_escape(g, (12, 4), (28, 4), 16 * 12.0, p, EP)
    target = (res.landing_point.col - 1, res.landing_point.row)
    fixed = repair_flight_tail(g, res.path, target, p, EP)
    assert fixed[0] == res.path[0]
    assert fixed[-1][:2] == target
    space = VoxelSpace(g, p)
    assert space.is_surface(fixed[-1])
    for a, b in zip(fixed, fixed[1:]):
        assert max(abs(a[i] - b[i]) for i in range(3)) == 1
