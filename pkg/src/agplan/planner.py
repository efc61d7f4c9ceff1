"""End-to-end drive/fly planning: alternate ground and flight searches,
refine every switching point, and keep a running energy/SOC ledger."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.interpolate import BSpline

from .config import RunConfig
from .energy import (DRIVE, FLY, BatteryState, EnergyParams, debit, segment_between,
                     segment_energy, transform_energy)
from .errors import (BatteryExhaustedError, ConsistencyError, ContractError, IterationCapError,
                     NoPathError)
from .flight import (DIRECT, LANDED, NO_PATH, REACHED_GOAL as FLIGHT_REACHED, VoxelSpace,
                     repair_flight_tail, search_flight_direct, search_flight_escape,
                     select_flight_mode)
from .flight import LANDING as LANDING_STAGE
from .ground import (EXHAUSTED, REACHED_GOAL, MobilityLimits, _reconstruct, feasible_node,
                     manhattan_m, repair_ground_path, search_ground)
from .switch_opt import (LANDING_SWITCH, TAKEOFF_SWITCH, SwitchContext, SwitchResult,
                         optimize_switch_point)
from .terrain import GridIndex, TerrainGrid

GROUND_TO_AIR = "ground->air"
AIR_TO_GROUND = "air->ground"


@dataclass(frozen=True)
class PathNode:
    position: tuple
    mode: str
    cumulative_energy: float
    soc: float
    is_switch_point: bool = False


class SwitchRecord(NamedTuple):
    index: int
    direction: str
    initial_point: GridIndex
    optimized_point: GridIndex
    initial_fitness: Optional[float] = None
    optimized_fitness: Optional[float] = None
    evaluations: int = 0


@dataclass
class PlannedPath:
    nodes: list
    switch_points: list
    total_energy: float
    total_distance: float
    mode_legs: list
    q_capacity: float
    q_initial: float
    flight_stages: list = field(default_factory=list)
    flight_outcomes: list = field(default_factory=list)

    @property
    def soc_trace(self) -> list:
        return [n.soc for n in self.nodes]


def mode_legs(nodes) -> list:
    """Contiguous runs of equal mode as ``(mode, first_index, last_index)``."""
    legs = []
    for i, n in enumerate(nodes):
        if legs and legs[-1][0] == n.mode:
            legs[-1] = (n.mode, legs[-1][1], i)
        else:
            legs.append((n.mode, i, i))
    return legs


class _Ledger:
    """Appends path nodes while charging energy segment by segment."""

    def __init__(self, battery: BatteryState, params: EnergyParams, start_pos):
        self.params = params
        self.battery = battery
        self.nodes = [PathNode(tuple(start_pos), DRIVE, 0.0, battery.soc)]
        self.distance = 0.0

    def extend(self, positions, mode: str):
        for p in positions:
            last = self.nodes[-1]
            seg = segment_between(last.position, p, mode)
            e = segment_energy(self.params, seg, switched=(mode != last.mode))
            try:
                self.battery = debit(self.battery, e)
            except BatteryExhaustedError as exc:
                raise BatteryExhaustedError(str(exc), self.snapshot()) from None
            self.distance += seg.delta_d
            self.nodes.append(PathNode(tuple(p), mode, last.cumulative_energy + e, self.battery.soc))

    def mark_switch(self):
        self.nodes[-1] = replace(self.nodes[-1], is_switch_point=True)

    def snapshot(self, switches=(), stages=(), outcomes=()) -> PlannedPath:
        nodes = list(self.nodes)
        return PlannedPath(nodes, list(switches), nodes[-1].cumulative_energy, self.distance,
                           mode_legs(nodes), self.battery.q_capacity, self.battery.q_initial,
                           list(stages), list(outcomes))


def reachable_cells(grid: TerrainGrid, origin, limits: MobilityLimits, radius: float) -> frozenset:
    """Drivable cells connected to ``origin`` without leaving a disc of ``radius``."""
    origin = GridIndex(*origin)
    c = grid.cell_size
    seen = {origin}
    queue = deque([origin])
    while queue:
        n = queue.popleft()
        for nb in grid.neighbors(n):
            if nb in seen:
                continue
            if math.hypot((nb.col - origin.col) * c, (nb.row - origin.row) * c) > radius + 1e-9:
                continue
            if not feasible_node(grid, nb, limits):
                continue
            seen.add(nb)
            queue.append(nb)
    return frozenset(seen)


def _point_back(positions, anchor, radius):
    """Last position along ``positions`` at least ``radius`` horizontally before the end."""
    for p in reversed(positions):
        if math.hypot(p[0] - anchor[0], p[1] - anchor[1]) >= radius:
            return tuple(p)
    return tuple(positions[0])


def _intent_point(grid: TerrainGrid, frm, goal, distance: float):
    """Horizontal point ``distance`` metres from ``frm`` towards ``goal``, clamped to the goal."""
    fx, fy = frm[0] * grid.cell_size, frm[1] * grid.cell_size
    gx, gy = goal[0] * grid.cell_size, goal[1] * grid.cell_size
    d = math.hypot(gx - fx, gy - fy)
    if d <= distance or d == 0:
        return gx, gy
    t = distance / d
    return fx + t * (gx - fx), fy + t * (gy - fy)


def _max_elevation_along(grid: TerrainGrid, a, b) -> float:
    n = max(2, int(math.hypot(b[0] - a[0], b[1] - a[1]) / (grid.cell_size / 2)) + 1)
    best = -math.inf
    for t in np.linspace(0.0, 1.0, n):
        idx = grid.nearest_index(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))
        if not grid.is_nodata(idx):
            best = max(best, float(grid.elevations[idx.row, idx.col]))
    return best


def takeoff_context(grid, ground_path, goal, config: RunConfig) -> SwitchContext:
    sp = ground_path[-1]
    radius = config.bas.search_radius
    positions = [grid.position(n) for n in ground_path]
    before = _point_back(positions, positions[-1], radius)
    ix, iy = _intent_point(grid, sp, goal, 2 * radius)
    start_xy = (sp[0] * grid.cell_size, sp[1] * grid.cell_size)
    cruise = _max_elevation_along(grid, start_xy, (ix, iy)) + config.flight.voxel_size
    cruise = min(cruise, config.flight.z_ceiling)
    return SwitchContext(TAKEOFF_SWITCH, GridIndex(*sp), before, (ix, iy, cruise),
                         reachable_cells(grid, sp, config.limits, radius), config.limits)


def landing_context(grid, flight_positions, landing, goal, config: RunConfig) -> SwitchContext:
    radius = config.bas.search_radius
    before = _point_back(flight_positions, flight_positions[-1], radius)
    ix, iy = _intent_point(grid, landing, goal, 2 * radius)
    near = grid.nearest_index(ix, iy)
    after = (ix, iy, float(grid.elevations[near.row, near.col]))
    return SwitchContext(LANDING_SWITCH, GridIndex(*landing), before, after,
                         reachable_cells(grid, landing, config.limits, radius), config.limits)


Optimizer = Callable[..., SwitchResult]


def _default_optimizer(grid, initial, context, bas_params, energy_params, soc, switch_index):
    params = replace(bas_params, seed=bas_params.seed + switch_index)
    return optimize_switch_point(grid, initial, context, params, energy_params, soc=soc)


def plan(grid: TerrainGrid, start, goal, config: Optional[RunConfig] = None, *,
         optimize: Optional[bool] = None, optimizer: Optional[Optimizer] = None) -> PlannedPath:
    """Plan a drive/fly path from ``start`` to ``goal``.

    Ground search runs until it reaches the goal or its takeoff counter
    fires; the takeoff point is refined, a flight search (direct near the
    goal, trap-escape otherwise) carries the robot to a landing point, which
    is refined in turn, and ground search resumes.  ``optimizer`` replaces
    BAS for every switch; it is called as
    ``optimizer(grid, initial, context, bas_params, energy_params, soc, switch_index)``.
    """
    cfg = (config or RunConfig()).resolve(grid)
    optimize = cfg.planner.optimize if optimize is None else optimize
    optimizer = optimizer or _default_optimizer
    start, goal = GridIndex(*start), GridIndex(*goal)
    for name, idx in (("start", start), ("goal", goal)):
        if not grid.in_bounds(idx) or not feasible_node(grid, idx, cfg.limits):
            raise ContractError(f"{name} cell {tuple(idx)} is not a drivable cell")

    ep = cfg.energy
    ledger = _Ledger(cfg.battery.initial_state(), ep, grid.position(start))
    space = VoxelSpace(grid, cfg.flight)
    switches, stages, outcomes = [], [], []
    current = start

    def partial():
        return ledger.snapshot(switches, stages, outcomes)

    def refine(initial, context, direction):
        if not optimize:
            return initial, None
        res = optimizer(grid, initial, context, cfg.bas, ep, ledger.battery.soc, len(switches))
        return GridIndex(*res.point), res

    def record(direction, initial, chosen, res):
        ledger.mark_switch()
        init_f = res.initial_fitness.f if res is not None and res.initial_fitness is not None else None
        opt_f = res.fitness.f if res is not None else None
        evals = res.evaluations if res is not None else 0
        switches.append(SwitchRecord(len(ledger.nodes) - 1, direction, initial, chosen,
                                     init_f, opt_f, evals))
        if len(switches) > cfg.planner.max_switches:
            raise IterationCapError(f"switch cap of {cfg.planner.max_switches} reached", partial())

    try:
        while True:
            res = search_ground(grid, current, goal, cfg.limits, ep, ledger.battery)
            if res.outcome == REACHED_GOAL:
                ledger.extend([grid.position(n) for n in res.partial_path[1:]], DRIVE)
                if ledger.nodes[-1].mode == FLY:
                    ledger.extend([grid.position(current)], DRIVE)
                return partial()
            if res.outcome == EXHAUSTED:
                if not (cfg.planner.takeoff_on_exhausted and res.closest_node != current):
                    raise NoPathError("ground search exhausted without reaching the goal "
                                      "or triggering a takeoff", partial())
                ground_path = _reconstruct(res.parents, res.closest_node)
            else:
                ground_path = res.partial_path

            # ground -> air
            initial_sp = ground_path[-1]
            sp, opt = initial_sp, None
            if optimize:
                sp, opt = refine(initial_sp, takeoff_context(grid, ground_path, goal, cfg), GROUND_TO_AIR)
                if sp != initial_sp:
                    repaired = repair_ground_path(grid, ground_path, sp, cfg.limits, ep)
                    if repaired:
                        ground_path = repaired
                    else:
                        sp = initial_sp
            ledger.extend([grid.position(n) for n in ground_path[1:]], DRIVE)
            if ledger.nodes[-1].mode == FLY:
                ledger.extend([grid.position(ground_path[-1])], DRIVE)
            record(GROUND_TO_AIR, initial_sp, sp, opt)

            flight_battery = debit(ledger.battery, transform_energy(ep)).takeoff()
            if select_flight_mode(manhattan_m(grid, sp, goal), cfg.flight) == DIRECT:
                fres = search_flight_direct(grid, sp, goal, cfg.flight, ep, flight_battery)
                outcomes.append(fres.outcome)
                if fres.outcome != FLIGHT_REACHED:
                    raise NoPathError("direct flight found no path to the goal", partial())
                ledger.extend(fres.positions[1:], FLY)
                stages.append([])
                return partial()

            # the robot drove to sp, so it counts towards the ground search's best approach
            h2d_seed = min(res.h2d_min, manhattan_m(grid, sp, goal))
            fres = search_flight_escape(grid, sp, goal, h2d_seed, cfg.flight, ep,
                                        flight_battery, cfg.limits)
            outcomes.append(fres.outcome)
            if fres.outcome == NO_PATH:
                raise NoPathError("trap-escape flight found no landing point", partial())
            flight_path, landing = fres.path, fres.landing_point
            stage_log = fres.stages

            # air -> ground
            lp, opt = landing, None
            if optimize:
                ctx = landing_context(grid, fres.positions, landing, goal, cfg)
                lp, opt = refine(landing, ctx, AIR_TO_GROUND)
                if lp != landing:
                    repaired = repair_flight_tail(grid, flight_path, lp, cfg.flight, ep)
                    if repaired:
                        kept = len(_common_prefix(flight_path, repaired))
                        stage_log = stage_log[:kept] + [LANDING_STAGE] * (len(repaired) - kept)
                        flight_path = repaired
                    else:
                        lp = landing
            positions = [space.position(n) for n in flight_path]
            ledger.extend(positions[1:], FLY)
            stages.append(stage_log)
            record(AIR_TO_GROUND, landing, lp, opt)
            current = lp
    except BatteryExhaustedError as exc:
        if exc.partial_path is None:
            exc.partial_path = partial()
        raise


def _common_prefix(a, b) -> list:
    out = []
    for x, y in zip(a, b):
        if x != y:
            break
        out.append(x)
    return out


# -- accounting ---------------------------------------------------------------------

class LegAccount(NamedTuple):
    mode: str
    joules: float
    meters: float


@dataclass
class AccountReport:
    per_leg: list
    total_energy: float
    total_distance: float
    transform_count: int
    soc_trace: list


def account(path: PlannedPath, energy_params: EnergyParams, rtol: float = 1e-9) -> AccountReport:
    """Recompute path energy from node positions and check it against the ledger."""
    nodes = path.nodes
    per_leg = []
    cum = 0.0
    consumed = 0.0
    soc_trace = [path.q_initial / path.q_capacity] if nodes else []
    transforms = 0
    distance = 0.0
    leg_e = leg_d = 0.0
    leg_mode = nodes[0].mode if nodes else DRIVE
    for prev, node in zip(nodes, nodes[1:]):
        switched = node.mode != prev.mode
        if switched:
            per_leg.append(LegAccount(leg_mode, leg_e, leg_d))
            leg_mode, leg_e, leg_d = node.mode, 0.0, 0.0
            transforms += 1
        seg = segment_between(prev.position, node.position, node.mode)
        e = segment_energy(energy_params, seg, switched)
        cum += e
        consumed += e
        distance += seg.delta_d
        leg_e += e
        leg_d += seg.delta_d
        soc_trace.append((path.q_initial - consumed) / path.q_capacity)
        if not math.isclose(cum, node.cumulative_energy, rel_tol=rtol, abs_tol=1e-9):
            raise ConsistencyError(
                f"recomputed energy {cum!r} J disagrees with ledger {node.cumulative_energy!r} J"
            )
    if nodes:
        per_leg.append(LegAccount(leg_mode, leg_e, leg_d))
    if nodes and not math.isclose(cum, path.total_energy, rel_tol=rtol, abs_tol=1e-9):
        raise ConsistencyError(f"recomputed total {cum!r} J disagrees with {path.total_energy!r} J")
    return AccountReport(per_leg, cum, distance, transforms, soc_trace)


def path_from_rows(rows, q_capacity: float, q_initial: float) -> PlannedPath:
    """Rebuild a :class:`PlannedPath` from exported CSV rows (dicts)."""
    nodes = []
    for i, r in enumerate(rows):
        nodes.append(PathNode((float(r["x"]), float(r["y"]), float(r["z"])), r["mode"],
                              float(r["cum_energy_J"]), float(r["soc"])))
    for i in range(len(nodes) - 1):
        if nodes[i].mode != nodes[i + 1].mode:
            nodes[i] = replace(nodes[i], is_switch_point=True)
    distance = sum(math.dist(a.position, b.position) for a, b in zip(nodes, nodes[1:]))
    total = nodes[-1].cumulative_energy if nodes else 0.0
    return PlannedPath(nodes, [], total, distance, mode_legs(nodes), q_capacity, q_initial)


# -- smoothing ----------------------------------------------------------------------

@dataclass
class SmoothedPath:
    samples: np.ndarray
    modes: list
    max_deviation: float
    control_points: list = field(default_factory=list)


def _clamped_bspline(controls: np.ndarray, n_samples: int) -> np.ndarray:
    n = len(controls)
    if n == 1:
        return np.repeat(controls, n_samples, axis=0)
    k = min(3, n - 1)
    inner = np.linspace(0.0, 1.0, n - k + 1)[1:-1]
    knots = np.concatenate([np.zeros(k + 1), inner, np.ones(k + 1)])
    curve = BSpline(knots, controls, k)(np.linspace(0.0, 1.0, n_samples))
    curve[0], curve[-1] = controls[0], controls[-1]
    return curve


def _point_segment_distance(p, a, b) -> float:
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0 else min(1.0, max(0.0, float((p - a) @ ab) / denom))
    return float(np.linalg.norm(p - (a + t * ab)))


def polyline_distance(p, polyline) -> float:
    poly = np.asarray(polyline, dtype=np.float64)
    if len(poly) == 1:
        return float(np.linalg.norm(p - poly[0]))
    return min(_point_segment_distance(p, a, b) for a, b in zip(poly, poly[1:]))


def smooth(path: PlannedPath, samples_per_leg: int = 50) -> SmoothedPath:
    """Fit a clamped cubic B-spline to every mode leg.

    Each leg uses its raw nodes (plus the preceding switch node) as control
    points, so curves start and end exactly on switching points and each
    sample stays inside its leg's control-point hull.
    """
    if samples_per_leg < 2:
        raise ValueError("samples_per_leg must be at least 2")
    nodes = path.nodes
    all_samples, modes, controls_out = [], [], []
    max_dev = 0.0
    for mode, first, last in mode_legs(nodes):
        lo = first - 1 if first > 0 else first
        controls = np.array([n.position for n in nodes[lo:last + 1]], dtype=np.float64)
        curve = _clamped_bspline(controls, samples_per_leg)
        for p in curve:
            max_dev = max(max_dev, polyline_distance(p, controls))
        all_samples.append(curve)
        modes.extend([mode] * len(curve))
        controls_out.append(controls)
    samples = np.vstack(all_samples) if all_samples else np.empty((0, 3))
    return SmoothedPath(samples, modes, max_dev, controls_out)
