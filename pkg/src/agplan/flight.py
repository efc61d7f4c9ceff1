"""Fly-mode 3D A* over a voxel column space above the terrain.

Two variants: a direct search for goals within ``near_goal_radius`` and the
trap-escape search, whose stateful heuristic steers the search upward, then
forward, then back down to a drivable landing cell.

Voxel ``(col, row, k)`` sits at altitude ``k * voxel_size`` except the lowest
allowed level of each column, which is pinned to the terrain surface so that
landing and takeoff nodes lie exactly on the ground.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .energy import FLY, BatteryState, EnergyParams, debit, flight_soc_delta, segment_energy, Segment
from .errors import ConfigError, ContractError
from .ground import MobilityLimits, feasible_node, manhattan_m
from .terrain import GridIndex, TerrainGrid

TAKEOFF = "takeoff"
ESCAPE = "escape"
LANDING = "landing"
STAGE_ORDER = {TAKEOFF: 0, ESCAPE: 1, LANDING: 2}

LANDED = "landed"
REACHED_GOAL = "reached-goal"
NO_PATH = "no-path"
BATTERY_LIMIT_LANDING = "battery-limit-landing"

DIRECT = "direct"
ESCAPE_MODE = "escape"

_OFFSETS_26 = tuple(
    (dc, dr, dk)
    for dk in (-1, 0, 1) for dr in (-1, 0, 1) for dc in (-1, 0, 1)
    if (dc, dr, dk) != (0, 0, 0)
)


@dataclass(frozen=True)
class FlightParams:
    """Trap-escape thresholds and voxel geometry, all in metres.

    ``None`` fields are filled by :meth:`resolve` from the grid: the escape
    and landing thresholds default to 2 and 10 cells, the climb bias to half
    a voxel, the direct-flight radius to 15 cells, voxels are cubic with the
    cell size, and the ceiling sits ``ceiling_margin`` voxels above the
    highest terrain.
    """

    c_escape: Optional[float] = None
    c_landing: Optional[float] = None
    epsilon: Optional[float] = None
    z_ceiling: Optional[float] = None
    near_goal_radius: Optional[float] = None
    voxel_size: Optional[float] = None
    ceiling_margin: int = 3
    max_expansions: int = 500_000

    def resolve(self, grid: TerrainGrid) -> "FlightParams":
        cell = grid.cell_size
        voxel = self.voxel_size if self.voxel_size is not None else cell
        resolved = replace(
            self,
            voxel_size=voxel,
            c_escape=2 * cell if self.c_escape is None else self.c_escape,
            c_landing=10 * cell if self.c_landing is None else self.c_landing,
            epsilon=voxel / 2 if self.epsilon is None else self.epsilon,
            near_goal_radius=15 * cell if self.near_goal_radius is None else self.near_goal_radius,
            z_ceiling=(grid.max_elevation + self.ceiling_margin * voxel
                       if self.z_ceiling is None else self.z_ceiling),
        )
        resolved.validate(grid)
        return resolved

    def validate(self, grid: Optional[TerrainGrid] = None):
        if None in (self.c_escape, self.c_landing, self.epsilon, self.z_ceiling,
                    self.near_goal_radius, self.voxel_size):
            raise ConfigError("flight parameters are unresolved; call resolve(grid) first")
        if not 0 < self.c_escape < self.c_landing:
            raise ConfigError("flight thresholds need 0 < c_escape < c_landing")
        if not self.epsilon > 0 or not self.voxel_size > 0 or self.near_goal_radius < 0:
            raise ConfigError("flight.epsilon and flight.voxel_size must be positive")
        if grid is not None and not self.z_ceiling > grid.max_elevation:
            raise ConfigError(
                f"flight.z_ceiling={self.z_ceiling} must exceed max terrain elevation {grid.max_elevation}"
            )


@dataclass
class TrapEscapeState:
    h2d0: float
    h2d: float = 0.0
    stage: str = TAKEOFF
    z_dummy: float = 0.0
    soc_override: bool = False


@dataclass
class FlightSearchResult:
    outcome: str
    path: list = field(default_factory=list)
    positions: list = field(default_factory=list)
    landing_point: Optional[GridIndex] = None
    stages: list = field(default_factory=list)
    energy: float = 0.0
    battery: Optional[BatteryState] = None
    expanded: int = 0


def stage_for(delta_h2d: float, params: FlightParams) -> str:
    """Stage implied by progress ``delta_h2d``; equality with c_landing lands."""
    if delta_h2d < params.c_escape:
        return TAKEOFF
    if delta_h2d < params.c_landing:
        return ESCAPE
    return LANDING


def trap_escape_heuristic(state: TrapEscapeState, z_curr: float, z_ground: float,
                          params: FlightParams, battery: Optional[BatteryState] = None) -> float:
    """Horizontal Manhattan distance plus the gap to a stage-dependent dummy altitude.

    Updates ``state`` in place (running maximum ``h2d0``, stage, dummy
    altitude).  When the SOC spent since takeoff exceeds ``battery.soc_ref``
    the dummy altitude is forced to the ground whatever the stage.
    """
    if state.h2d0 < state.h2d:
        state.h2d0 = state.h2d
    delta = state.h2d0 - state.h2d
    state.stage = stage_for(delta, params)
    if state.stage == TAKEOFF:
        state.z_dummy = z_curr + params.epsilon
    elif state.stage == ESCAPE:
        state.z_dummy = z_curr
    else:
        state.z_dummy = z_ground
    state.soc_override = battery is not None and flight_soc_delta(battery) > battery.soc_ref
    if state.soc_override:
        state.stage = LANDING
        state.z_dummy = z_ground
    return state.h2d + abs(state.z_dummy - z_curr)


def select_flight_mode(h2d_to_goal: float, params: FlightParams) -> str:
    return DIRECT if h2d_to_goal <= params.near_goal_radius else ESCAPE_MODE


class VoxelSpace:
    """Allowed voxels: on or above the terrain surface and at or below the ceiling."""

    def __init__(self, grid: TerrainGrid, params: FlightParams):
        self.grid = grid
        self.voxel = params.voxel_size
        self.ceiling = params.z_ceiling
        elev = np.where(grid.nodata_mask, np.inf, grid.elevations)
        with np.errstate(invalid="ignore"):
            self.kmin = np.ceil(elev / self.voxel - 1e-9)
        self.kmax = math.floor(self.ceiling / self.voxel + 1e-9)

    def allowed(self, c, r, k) -> bool:
        g = self.grid
        if not (0 <= c < g.ncols and 0 <= r < g.nrows):
            return False
        kmin = self.kmin[r, c]
        return kmin <= k and (k <= self.kmax or k == kmin) and math.isfinite(kmin)

    def surface_level(self, c, r) -> int:
        return int(self.kmin[r, c])

    def is_surface(self, node) -> bool:
        return node[2] == self.kmin[node[1], node[0]]

    def altitude(self, node) -> float:
        c, r, k = node
        if k == self.kmin[r, c]:
            return float(self.grid.elevations[r, c])
        return k * self.voxel

    def position(self, node) -> tuple:
        c, r, _ = node
        cs = self.grid.cell_size
        return (c * cs, r * cs, self.altitude(node))

    def surface_node(self, idx) -> tuple:
        c, r = idx
        if not math.isfinite(self.kmin[r, c]):
            raise ContractError(f"cell {tuple(idx)} has no valid voxel column")
        return (c, r, self.surface_level(c, r))

    def neighbors(self, node):
        c, r, k = node
        for dc, dr, dk in _OFFSETS_26:
            nb = (c + dc, r + dr, k + dk)
            if self.allowed(*nb):
                yield nb


def fly_cost(space: VoxelSpace, params: EnergyParams, a, b) -> float:
    pa, pb = space.position(a), space.position(b)
    d = math.dist(pa, pb)
    return segment_energy(params, Segment(d, pb[2] - pa[2], FLY))


def _reconstruct(parents, node):
    out = [node]
    while parents[node] is not None:
        node = parents[node]
        out.append(node)
    out.reverse()
    return out


def _flight_battery(battery: Optional[BatteryState]) -> Optional[BatteryState]:
    if battery is None:
        return None
    return battery if battery.in_flight else battery.takeoff()


def _finish(outcome, space, path, parents_stage, energy_params, battery, expanded, landing=None):
    positions = [space.position(n) for n in path]
    energy = 0.0
    b = battery
    for a, nb in zip(path, path[1:]):
        e = fly_cost(space, energy_params, a, nb)
        energy += e
        if b is not None:
            b = debit(b, e)
    stages = [parents_stage.get(n) for n in path] if parents_stage is not None else []
    return FlightSearchResult(outcome, path, positions, landing, stages, energy, b, expanded)


def _astar(space, start, energy_params, battery, heuristic, is_goal, max_expansions,
           neighbor_filter=None):
    """Best-first search shared by both flight modes.

    ``heuristic(node, g)`` returns ``(h_joules, stage)``; ``is_goal(node, g)``
    returns an outcome string or ``None``.
    """
    scale = energy_params.fly_energy_per_meter
    remaining = math.inf if battery is None else battery.soc * battery.q_capacity
    g = {start: 0.0}
    parents = {start: None}
    h, stage = heuristic(start, 0.0)
    stages = {start: stage}
    heap = [(scale * h, h, start, 0.0)]
    closed = set()
    expanded = 0
    while heap:
        _, _, node, g_entry = heapq.heappop(heap)
        if node in closed or g_entry != g[node]:
            continue
        closed.add(node)
        expanded += 1
        outcome = is_goal(node, g[node])
        if outcome is not None:
            return outcome, _reconstruct(parents, node), stages, expanded
        if expanded >= max_expansions:
            break
        for nb in space.neighbors(node):
            if nb in closed or (neighbor_filter is not None and not neighbor_filter(node, nb)):
                continue
            new_g = g[node] + fly_cost(space, energy_params, node, nb)
            if new_g > remaining or new_g >= g.get(nb, math.inf):
                continue
            g[nb] = new_g
            parents[nb] = node
            h, stage = heuristic(nb, new_g)
            stages[nb] = stage
            heapq.heappush(heap, (new_g + scale * h, h, nb, new_g))
    return NO_PATH, [], stages, expanded


def search_flight_direct(grid: TerrainGrid, start, goal, params: FlightParams,
                         energy_params: EnergyParams, battery: Optional[BatteryState] = None,
                         *, goal_z: Optional[float] = None, start_z: Optional[float] = None
                         ) -> FlightSearchResult:
    """Plain 3D A* to the goal with a 3D Manhattan heuristic.

    The goal defaults to the surface voxel of the goal cell; ``goal_z``
    selects an airborne goal level instead.  ``start_z`` likewise lifts the
    start off the surface.
    """
    params.validate(grid)
    space = VoxelSpace(grid, params)
    start_node = _node_at(space, start, start_z)
    goal_node = _node_at(space, goal, goal_z)
    fb = _flight_battery(battery)
    gpos = space.position(goal_node)

    def heuristic(node, _g):
        p = space.position(node)
        return abs(p[0] - gpos[0]) + abs(p[1] - gpos[1]) + abs(p[2] - gpos[2]), None

    def is_goal(node, _g):
        return REACHED_GOAL if node == goal_node else None

    outcome, path, _, expanded = _astar(space, start_node, energy_params, fb, heuristic,
                                        is_goal, params.max_expansions)
    if outcome == NO_PATH:
        return FlightSearchResult(NO_PATH, battery=battery, expanded=expanded)
    return _finish(outcome, space, path, None, energy_params, fb, expanded)


def _node_at(space: VoxelSpace, idx, z: Optional[float]):
    idx = GridIndex(*idx)
    if not space.grid.in_bounds(idx):
        raise ContractError(f"cell {tuple(idx)} is outside the grid")
    base = space.surface_node(idx)
    if z is None:
        return base
    k = int(round(z / space.voxel))
    node = (idx.col, idx.row, max(k, base[2]))
    if not space.allowed(*node):
        raise ContractError(f"altitude {z} is outside the voxel column at {tuple(idx)}")
    return node


def search_flight_escape(grid: TerrainGrid, start, goal, h2d0_seed: float, params: FlightParams,
                         energy_params: EnergyParams, battery: Optional[BatteryState] = None,
                         limits: Optional[MobilityLimits] = None) -> FlightSearchResult:
    """Trap-escape 3D A* from a takeoff cell to the first drivable landing cell.

    Landing happens when a surface voxel is expanded in the landing stage and
    its cell passes the drivable-slope test.  Once the SOC remaining at a node
    drops to ``soc_ref / 2`` the search abandons the heuristic and descends to
    the nearest drivable surface cell.
    """
    params.validate(grid)
    limits = limits or MobilityLimits()
    space = VoxelSpace(grid, params)
    goal = GridIndex(*goal)
    start_node = space.surface_node(start)
    fb = _flight_battery(battery)
    state = TrapEscapeState(h2d0=h2d0_seed)
    emergency = {}

    def battery_at(g_cost):
        if fb is None:
            return None
        return replace(fb, consumed=fb.consumed + g_cost)

    def heuristic(node, g_cost):
        state.h2d = manhattan_m(grid, node, goal)
        c, r, _ = node
        h = trap_escape_heuristic(state, space.altitude(node), float(grid.elevations[r, c]),
                                  params, battery_at(g_cost))
        return h, state.stage

    def is_goal(node, g_cost):
        b = battery_at(g_cost)
        if b is not None and b.soc <= b.soc_ref / 2.0 and node != start_node:
            emergency["node"] = node
            return BATTERY_LIMIT_LANDING
        if node[:2] == tuple(start_node[:2]) or not space.is_surface(node):
            return None
        h2d = manhattan_m(grid, node, goal)
        delta = max(state.h2d0, h2d) - h2d
        override = b is not None and flight_soc_delta(b) > b.soc_ref
        if (override or stage_for(delta, params) == LANDING) and feasible_node(grid, node[:2], limits):
            return BATTERY_LIMIT_LANDING if override else LANDED
        return None

    outcome, path, stages, expanded = _astar(space, start_node, energy_params, fb, heuristic,
                                             is_goal, params.max_expansions)
    if outcome == NO_PATH:
        return FlightSearchResult(NO_PATH, battery=battery, expanded=expanded)
    if "node" in emergency and not (space.is_surface(path[-1]) and feasible_node(grid, path[-1][:2], limits)):
        tail = _emergency_descent(space, path[-1], energy_params, limits)
        if not tail:
            return FlightSearchResult(NO_PATH, battery=battery, expanded=expanded)
        for n in tail[1:]:
            stages[n] = LANDING
        path = path + tail[1:]
    landing = GridIndex(path[-1][0], path[-1][1])
    return _finish(outcome, space, path, stages, energy_params, fb, expanded, landing)


def _emergency_descent(space: VoxelSpace, node, energy_params, limits):
    """Cheapest non-climbing route from ``node`` to a drivable surface voxel."""
    grid = space.grid
    g = {node: 0.0}
    parents = {node: None}
    heap = [(0.0, node)]
    done = set()
    while heap:
        cost, n = heapq.heappop(heap)
        if n in done:
            continue
        done.add(n)
        if space.is_surface(n) and feasible_node(grid, n[:2], limits):
            return _reconstruct(parents, n)
        for nb in space.neighbors(n):
            if nb[2] > n[2] or nb in done:
                continue
            c = cost + fly_cost(space, energy_params, n, nb)
            if c < g.get(nb, math.inf):
                g[nb] = c
                parents[nb] = n
                heapq.heappush(heap, (c, nb))
    return []


def repair_flight_tail(grid: TerrainGrid, path: list, target, params: FlightParams,
                       energy_params: EnergyParams) -> list:
    """Re-route the end of a voxel path so it lands on ``target``'s surface voxel.

    Keeps the prefix up to the airborne path node horizontally nearest the
    target and joins it with a direct 3D search.
    """
    space = VoxelSpace(grid, params)
    goal_node = space.surface_node(target)
    if goal_node in path:
        return path[: path.index(goal_node) + 1]
    candidates = range(len(path) - 1) if len(path) > 1 else range(1)
    best = min(candidates, key=lambda i: (math.hypot(path[i][0] - goal_node[0],
                                                     path[i][1] - goal_node[1]), -i))
    anchor = path[best]
    res = search_flight_direct(grid, anchor[:2], goal_node[:2], params, energy_params,
                               start_z=space.altitude(anchor) if not space.is_surface(anchor) else None)
    if res.outcome != REACHED_GOAL:
        return []
    return path[:best] + res.path
