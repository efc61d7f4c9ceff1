"""Ground-mode A* over the DEM with the takeoff-decision counter.

Edge cost is drive-mode segment energy.  While expanding, each chain of
parent links carries a counter of consecutive hard transitions (difficulty
above the maneuverability index); when it passes the threshold the search
stops and reports the current node as the initial takeoff point.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .energy import DRIVE, EnergyParams, segment_between, segment_energy
from .errors import ConfigError, ContractError
from .terrain import GridIndex, TerrainGrid, elevation_at, gradient_at

REACHED_GOAL = "reached-goal"
TAKEOFF_REQUIRED = "takeoff-required"
EXHAUSTED = "exhausted"

# keeps the heuristic strictly below true cost despite rounding
_ADMISSIBLE_MARGIN = 1.0 - 1e-9


@dataclass(frozen=True)
class MobilityLimits:
    """Drivable slope envelope and takeoff-trigger settings.

    The slope bounds and maneuverability index have no published values;
    0.35 (about 19 degrees) is a plausible ground-vehicle limit.
    """

    gx_min: float = -0.35
    gx_max: float = 0.35
    gy_min: float = -0.35
    gy_max: float = 0.35
    gz_min: float = 0.0
    gz_max: float = 0.35
    m_index: float = 0.35
    count_threshold: int = 7
    turn_weight: float = 1.0
    heuristic_weight: float = 1.0

    def __post_init__(self):
        for axis in ("gx", "gy", "gz"):
            if not getattr(self, f"{axis}_min") < getattr(self, f"{axis}_max"):
                raise ConfigError(f"limits.{axis}_min must be below limits.{axis}_max")
        if not self.m_index > 0:
            raise ConfigError("limits.m_index must be positive")
        if self.count_threshold < 1:
            raise ConfigError("limits.count_threshold must be at least 1")
        if self.turn_weight < 0 or not 0 < self.heuristic_weight <= 1:
            raise ConfigError("limits.turn_weight must be >= 0 and heuristic_weight in (0, 1]")


class TakeoffDecision(NamedTuple):
    count: int = 0
    flag: bool = False
    trigger_node: Optional[GridIndex] = None


@dataclass
class GroundSearchResult:
    outcome: str
    partial_path: list
    switching_point: Optional[GridIndex]
    h2d_min: float
    energy: float = 0.0
    expanded: int = 0
    parents: dict = field(default_factory=dict, repr=False)
    closest_node: Optional[GridIndex] = None


def dof_between(grid: TerrainGrid, frm, to, heading_prev=None, turn_weight: float = 1.0) -> float:
    """Scalar driving difficulty of the move ``frm -> to``.

    Maximum of the segment slope, the cross-slope at ``to`` and a turn
    severity term ``turn_weight * (1 - cos(theta)) / 2``.
    """
    dc, dr = to[0] - frm[0], to[1] - frm[1]
    if max(abs(dc), abs(dr)) != 1:
        raise ContractError(f"nodes {tuple(frm)} and {tuple(to)} are not 8-adjacent")
    norm = math.hypot(dc, dr)
    run = norm * grid.cell_size
    slope = abs(elevation_at(grid, to) - elevation_at(grid, frm)) / run
    g = gradient_at(grid, to)
    ux, uy = dc / norm, dr / norm
    cross = abs(g.gx * uy - g.gy * ux)
    turn = 0.0
    if heading_prev is not None:
        hx, hy = heading_prev
        hn = math.hypot(hx, hy)
        if hn > 0:
            cos_t = max(-1.0, min(1.0, (hx * ux + hy * uy) / hn))
            turn = turn_weight * (1.0 - cos_t) / 2.0
    return max(slope, cross, turn)


def takeoff_decision_step(state: TakeoffDecision, dof: float, limits: MobilityLimits,
                          node=None) -> TakeoffDecision:
    count = state.count + 1 if dof > limits.m_index else 0
    flag = count > limits.count_threshold
    return TakeoffDecision(count, flag, node if flag else None)


def feasible_node(grid: TerrainGrid, idx, limits: MobilityLimits) -> bool:
    """True when the cell's slope components sit inside every drivable bound."""
    col, row = idx
    if not grid.in_bounds(idx) or grid.nodata_mask[row, col]:
        return False
    gx, gy, gz = grid.gx[row, col], grid.gy[row, col], grid.gz[row, col]
    if math.isnan(gx) or math.isnan(gy):
        return False
    return (limits.gx_min <= gx <= limits.gx_max
            and limits.gy_min <= gy <= limits.gy_max
            and limits.gz_min <= gz <= limits.gz_max)


def manhattan_m(grid: TerrainGrid, a, b) -> float:
    return (abs(a[0] - b[0]) + abs(a[1] - b[1])) * grid.cell_size


def drive_cost(grid: TerrainGrid, params: EnergyParams, a, b, switched: bool = False) -> float:
    return segment_energy(params, segment_between(grid.position(a), grid.position(b), DRIVE), switched)


def _heuristic(grid, params, limits, n, goal) -> float:
    dx, dy = abs(n[0] - goal[0]), abs(n[1] - goal[1])
    cheb = max(dx, dy)
    octile = (max(dx, dy) - min(dx, dy) + math.sqrt(2.0) * min(dx, dy)) * grid.cell_size
    return (_ADMISSIBLE_MARGIN * limits.heuristic_weight
            * (params.standby_energy_per_segment * cheb + params.drive_energy_per_meter * octile))


def _reconstruct(parents, node) -> list:
    path = [node]
    while parents.get(node) is not None:
        node = parents[node]
        path.append(node)
    path.reverse()
    return path


def search_ground(grid: TerrainGrid, start, goal, limits: MobilityLimits,
                  energy_params: EnergyParams, battery=None, *,
                  use_takeoff: bool = True) -> GroundSearchResult:
    """Energy-optimal 2D A* with the takeoff-decision function.

    ``battery`` is accepted for interface symmetry with the flight searches;
    the ground phase does not debit it (the planner does, along the final
    path).  With ``use_takeoff=False`` this is a plain shortest-energy search
    used for local path repair.
    """
    start, goal = GridIndex(*start), GridIndex(*goal)
    for name, idx in (("start", start), ("goal", goal)):
        if not feasible_node(grid, idx, limits):
            raise ContractError(f"{name} cell {tuple(idx)} is not drivable")

    g = {start: 0.0}
    parents = {start: None}
    heading = {start: None}
    decision = {start: TakeoffDecision()}
    closed = set()
    h0 = _heuristic(grid, energy_params, limits, start, goal)
    open_heap = [(h0, h0, start, 0.0)]
    h2d_min = math.inf
    closest = start
    expanded = 0

    while open_heap:
        _, _, node, g_entry = heapq.heappop(open_heap)
        if node in closed or g_entry != g[node]:
            continue
        closed.add(node)
        expanded += 1
        h2d = manhattan_m(grid, node, goal)
        if h2d < h2d_min:
            h2d_min, closest = h2d, node
        if node == goal:
            return GroundSearchResult(REACHED_GOAL, _reconstruct(parents, node), None,
                                      h2d_min, g[node], expanded, parents, closest)
        if use_takeoff and decision[node].flag:
            return GroundSearchResult(TAKEOFF_REQUIRED, _reconstruct(parents, node), node,
                                      h2d_min, g[node], expanded, parents, closest)
        for nb in grid.neighbors(node):
            if nb in closed and nb not in g:
                continue
            if not feasible_node(grid, nb, limits):
                closed.add(nb)
                continue
            new_g = g[node] + drive_cost(grid, energy_params, node, nb)
            if new_g >= g.get(nb, math.inf):
                continue
            closed.discard(nb)
            g[nb] = new_g
            parents[nb] = node
            heading[nb] = (nb[0] - node[0], nb[1] - node[1])
            if use_takeoff:
                dof = dof_between(grid, node, nb, heading[node], limits.turn_weight)
                decision[nb] = takeoff_decision_step(decision[node], dof, limits, nb)
            else:
                decision[nb] = TakeoffDecision()
            h = _heuristic(grid, energy_params, limits, nb, goal)
            heapq.heappush(open_heap, (new_g + h, h, nb, new_g))

    return GroundSearchResult(EXHAUSTED, [], None, h2d_min, 0.0, expanded, parents, closest)


def path_energy(grid: TerrainGrid, params: EnergyParams, path) -> float:
    total = 0.0
    for a, b in zip(path, path[1:]):
        total += drive_cost(grid, params, a, b)
    return total


def repair_ground_path(grid: TerrainGrid, path: list, target, limits: MobilityLimits,
                       energy_params: EnergyParams) -> list:
    """Re-route the tail of ``path`` so it ends at ``target``.

    Keeps the prefix up to the path node nearest ``target`` (latest on ties)
    and joins it to ``target`` with a plain energy A*.
    """
    target = GridIndex(*target)
    if target in path:
        return path[: path.index(target) + 1]
    best = min(range(len(path)),
               key=lambda i: (math.dist(path[i], target), -i))
    res = search_ground(grid, path[best], target, limits, energy_params, use_takeoff=False)
    if res.outcome != REACHED_GOAL:
        return []
    return path[:best] + res.partial_path
