"""Mode-switching point refinement with Beetle Antennae Search (BAS).

A single beetle walks in 3D; after every move its centroid is projected back
onto the terrain surface and clamped to a disc around the initial switching
point.  Fitness is ``F = E + alpha * R`` where ``E`` is the local energy of
switching at the candidate and ``R`` a weighted slope penalty.  The best
point over every evaluation is kept, so the result never scores worse than
the initial point.

The baseline optimizers share the same :class:`SwitchLandscape`, which counts
fitness evaluations itself so budgets can be compared fairly.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple, Optional

import numpy as np

from .energy import DRIVE, FLY, EnergyParams, segment_between, segment_energy, transform_energy
from .errors import ConfigError
from .ground import MobilityLimits, feasible_node
from .terrain import GridIndex, TerrainGrid, gradient_at

TAKEOFF_SWITCH = "takeoff"
LANDING_SWITCH = "landing"
METHODS = ("bas", "exhaustive-grid", "random-search", "particle-swarm")


@dataclass(frozen=True)
class BasParams:
    """BAS hyperparameters; lengths are metres and ``None`` means cell-relative default.

    Defaults: antennae 4 cells apart, step 2 cells, search radius 8 cells.
    With ``alpha_schedule="linear"`` the slope weight grows with battery SOC,
    from ``alpha`` at empty to ``alpha_max`` at full.
    """

    antennae_distance: Optional[float] = None
    step: Optional[float] = None
    step_decay: float = 0.95
    iterations: int = 50
    alpha: float = 500.0
    w_a: float = 1.0
    w_b: float = 1.0
    w_c: float = 2.0
    seed: int = 0
    search_radius: Optional[float] = None
    alpha_schedule: str = "constant"
    alpha_max: float = 1000.0

    def resolve(self, grid: TerrainGrid) -> "BasParams":
        c = grid.cell_size
        out = replace(
            self,
            antennae_distance=4 * c if self.antennae_distance is None else self.antennae_distance,
            step=2 * c if self.step is None else self.step,
            search_radius=8 * c if self.search_radius is None else self.search_radius,
        )
        out.validate()
        return out

    def validate(self):
        if None in (self.antennae_distance, self.step, self.search_radius):
            raise ConfigError("BAS lengths are unresolved; call resolve(grid) first")
        if not (self.antennae_distance > 0 and self.step > 0 and self.search_radius > 0):
            raise ConfigError("bas.antennae_distance, bas.step and bas.search_radius must be positive")
        if not 0 < self.step_decay <= 1:
            raise ConfigError("bas.step_decay must lie in (0, 1]")
        if self.iterations < 0:
            raise ConfigError("bas.iterations must be non-negative")
        if self.alpha_schedule not in ("constant", "linear"):
            raise ConfigError("bas.alpha_schedule must be 'constant' or 'linear'")

    def alpha_at(self, soc: Optional[float]) -> float:
        if self.alpha_schedule == "constant" or soc is None:
            return self.alpha
        s = min(max(soc, 0.0), 1.0)
        return self.alpha + (self.alpha_max - self.alpha) * s


class SwitchFitness(NamedTuple):
    e_term: float
    r_term: float
    f: float


INFEASIBLE = SwitchFitness(math.inf, math.inf, math.inf)


@dataclass(frozen=True)
class SwitchContext:
    """Local plan around a switching point.

    ``before`` is the 3D point the robot comes from (on the ground for a
    takeoff, in the air for a landing) and ``after`` where it heads next.
    ``allowed`` restricts candidates to cells reachable by driving from the
    initial point.
    """

    direction: str
    initial: GridIndex
    before: tuple
    after: tuple
    allowed: frozenset = frozenset()
    limits: MobilityLimits = MobilityLimits()


def random_direction(rng: np.random.Generator, k: int = 3) -> np.ndarray:
    """Unit vector uniform on the sphere (normalised Gaussian sample)."""
    while True:
        v = rng.standard_normal(k)
        n = np.linalg.norm(v)
        if n > 1e-12:
            return v / n


def antennae_positions(centroid, b, d: float):
    """Right and left antenna tips ``centroid +/- d * b / 2``."""
    centroid = np.asarray(centroid, dtype=np.float64)
    half = d * np.asarray(b, dtype=np.float64) / 2.0
    return centroid + half, centroid - half


def slope_penalty(grid: TerrainGrid, idx, w_a: float, w_b: float, w_c: float) -> float:
    g = gradient_at(grid, idx)
    return w_a * abs(g.gx) + w_b * abs(g.gy) + w_c * g.gz


def fitness(grid: TerrainGrid, candidate, context: SwitchContext, energy_params: EnergyParams,
            alpha: float, w_a: float, w_b: float, w_c: float) -> SwitchFitness:
    """Score a candidate switching point (nearest grid cell of ``candidate``)."""
    idx = grid.nearest_index(candidate[0], candidate[1])
    if context.allowed and idx not in context.allowed:
        return INFEASIBLE
    if not feasible_node(grid, idx, context.limits):
        return INFEASIBLE
    p = grid.position(idx)
    if context.direction == TAKEOFF_SWITCH:
        first, second = DRIVE, FLY
    else:
        first, second = FLY, DRIVE
    e = (segment_energy(energy_params, segment_between(context.before, p, first))
         + transform_energy(energy_params)
         + segment_energy(energy_params, segment_between(p, context.after, second)))
    r = slope_penalty(grid, idx, w_a, w_b, w_c)
    return SwitchFitness(e, r, e + alpha * r)


def _as_fitness(value) -> SwitchFitness:
    if isinstance(value, SwitchFitness):
        return value
    v = float(value)
    return SwitchFitness(v, 0.0, v)


class SwitchLandscape:
    """Search domain: a disc of ``radius`` metres around the initial cell.

    Points are projected onto the terrain (nearest-cell height) and clamped
    to the disc and the grid extent.  Every call to :meth:`evaluate` is
    counted; cells whose centre falls outside the disc score infinity.
    """

    def __init__(self, grid: TerrainGrid, initial, radius: float,
                 fitness_fn: Callable, max_evaluations: Optional[int] = None):
        self.grid = grid
        self.initial = GridIndex(*initial)
        self.center = np.array(grid.position(self.initial), dtype=np.float64)
        self.radius = float(radius)
        self.fitness_fn = fitness_fn
        self.max_evaluations = max_evaluations
        self.evaluations = 0

    @property
    def remaining(self) -> float:
        if self.max_evaluations is None:
            return math.inf
        return self.max_evaluations - self.evaluations

    def project(self, point) -> np.ndarray:
        p = np.array(point, dtype=np.float64)
        d = p[:2] - self.center[:2]
        dist = float(np.hypot(*d))
        if dist > self.radius:
            p[:2] = self.center[:2] + d * (self.radius / dist)
        g = self.grid
        p[0] = min(max(p[0], 0.0), (g.ncols - 1) * g.cell_size)
        p[1] = min(max(p[1], 0.0), (g.nrows - 1) * g.cell_size)
        idx = g.nearest_index(p[0], p[1])
        p[2] = g.elevations[idx.row, idx.col]
        return p

    def in_disc(self, idx) -> bool:
        c = self.grid.cell_size
        return math.hypot((idx[0] - self.initial.col) * c,
                          (idx[1] - self.initial.row) * c) <= self.radius + 1e-9

    def evaluate(self, point) -> SwitchFitness:
        self.evaluations += 1
        idx = self.grid.nearest_index(point[0], point[1])
        if not self.in_disc(idx):
            return INFEASIBLE
        return _as_fitness(self.fitness_fn(point))

    def cells(self) -> list:
        c = self.grid.cell_size
        reach = int(math.floor(self.radius / c))
        out = []
        for dr in range(-reach, reach + 1):
            for dc in range(-reach, reach + 1):
                idx = GridIndex(self.initial.col + dc, self.initial.row + dr)
                if self.grid.in_bounds(idx) and self.in_disc(idx):
                    out.append(idx)
        return out

    def cell_point(self, idx) -> np.ndarray:
        c = self.grid.cell_size
        return np.array([idx[0] * c, idx[1] * c, self.grid.elevations[idx[1], idx[0]]])


@dataclass
class BasState:
    centroid: np.ndarray
    best_point: np.ndarray
    best_fitness: float
    best_detail: SwitchFitness
    step: float
    iteration: int = 0
    history: list = field(default_factory=list)
    evaluations: int = 0


@dataclass
class SwitchResult:
    point: GridIndex
    fitness: SwitchFitness
    trace: list
    evaluations: int
    method: str = "bas"
    initial_fitness: Optional[SwitchFitness] = None


def _consider(state: BasState, point, fit: SwitchFitness):
    if fit.f < state.best_fitness:
        state.best_fitness = fit.f
        state.best_detail = fit
        state.best_point = np.array(point, dtype=np.float64)


def init_bas(landscape: SwitchLandscape, params: BasParams, start=None) -> BasState:
    x0 = landscape.project(landscape.center if start is None else start)
    fit = landscape.evaluate(x0)
    state = BasState(centroid=x0, best_point=x0.copy(), best_fitness=fit.f, best_detail=fit,
                     step=params.step, evaluations=1)
    state.history.append((x0.copy(), fit))
    return state


def bas_step(state: BasState, params: BasParams, landscape: SwitchLandscape,
             rng: np.random.Generator) -> BasState:
    """One BAS iteration: probe both antennae, move against the worse side, re-score.

    Uses three fitness evaluations, or fewer when the landscape budget runs
    out mid-iteration (probes already taken still count toward the best).
    """
    b = random_direction(rng)
    right, left = antennae_positions(state.centroid, b, params.antennae_distance)
    right, left = landscape.project(right), landscape.project(left)
    if landscape.remaining < 1:
        return state
    f_right = landscape.evaluate(right)
    state.evaluations += 1
    _consider(state, right, f_right)
    if landscape.remaining < 1:
        return state
    f_left = landscape.evaluate(left)
    state.evaluations += 1
    _consider(state, left, f_left)
    diff = f_right.f - f_left.f
    sign = 0.0 if (math.isnan(diff) or diff == 0) else math.copysign(1.0, diff)
    state.centroid = landscape.project(state.centroid - state.step * b * sign)
    if landscape.remaining < 1:
        return state
    f_new = landscape.evaluate(state.centroid)
    state.evaluations += 1
    _consider(state, state.centroid, f_new)
    state.iteration += 1
    state.history.append((state.centroid.copy(), f_new))
    state.step *= params.step_decay
    return state


def _result(landscape, point, fit, trace, method, initial_fit) -> SwitchResult:
    idx = landscape.grid.nearest_index(point[0], point[1])
    return SwitchResult(idx, fit, trace, landscape.evaluations, method, initial_fit)


def switch_fitness_fn(grid, context: SwitchContext, params: BasParams, energy_params: EnergyParams,
                      soc: Optional[float] = None) -> Callable:
    alpha = params.alpha_at(soc)
    return lambda p: fitness(grid, p, context, energy_params, alpha, params.w_a, params.w_b, params.w_c)


def optimize_switch_point(grid: TerrainGrid, initial, context: Optional[SwitchContext],
                          params: BasParams, energy_params: EnergyParams, *,
                          fitness_fn: Optional[Callable] = None, soc: Optional[float] = None,
                          max_evaluations: Optional[int] = None) -> SwitchResult:
    """Refine ``initial`` with BAS and return the best cell seen.

    ``fitness_fn`` overrides the energy/slope fitness (any callable mapping a
    3D point to a float or :class:`SwitchFitness`).  With ``max_evaluations``
    the walk runs until that many evaluations are spent instead of
    ``params.iterations`` steps.
    """
    params = params if params.search_radius is not None else params.resolve(grid)
    if fitness_fn is None:
        fitness_fn = switch_fitness_fn(grid, context, params, energy_params, soc)
    landscape = SwitchLandscape(grid, initial, params.search_radius, fitness_fn, max_evaluations)
    rng = np.random.default_rng(params.seed)
    state = init_bas(landscape, params)
    if max_evaluations is None:
        for _ in range(params.iterations):
            bas_step(state, params, landscape, rng)
    else:
        while landscape.remaining >= 1:
            bas_step(state, params, landscape, rng)
    initial_fit = state.history[0][1]
    return _result(landscape, state.best_point, state.best_detail, state.history, "bas", initial_fit)


# -- baselines -----------------------------------------------------------------------

def _lattice_order(landscape: SwitchLandscape) -> list:
    """In-disc cells ordered coarse-to-fine so truncated sweeps stay spread out."""
    cells = landscape.cells()
    init = landscape.initial
    reach = max([max(abs(c.col - init.col), abs(c.row - init.row)) for c in cells] or [0])
    stride = 1
    while stride * 2 <= max(reach, 1):
        stride *= 2
    ordered, seen = [], set()
    while stride >= 1:
        layer = [c for c in cells
                 if c not in seen and (c.col - init.col) % stride == 0 and (c.row - init.row) % stride == 0]
        layer.sort(key=lambda c: (abs(c.col - init.col) + abs(c.row - init.row), c.col, c.row))
        ordered.extend(layer)
        seen.update(layer)
        stride //= 2
    return ordered


def baseline_optimize(method: str, budget: int, grid: TerrainGrid, initial, context: Optional[SwitchContext],
                      params: BasParams, energy_params: EnergyParams, *,
                      fitness_fn: Optional[Callable] = None, soc: Optional[float] = None,
                      seed: Optional[int] = None) -> SwitchResult:
    """Run one optimizer with exactly ``budget`` fitness evaluations.

    The budget includes the evaluation of the initial point, which every
    method scores first and keeps as its incumbent.  ``exhaustive-grid``
    sweeps in-disc cells coarse-to-fine and starts a new sweep when the
    budget exceeds the cell count.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    params = params if params.search_radius is not None else params.resolve(grid)
    if seed is not None:
        params = replace(params, seed=seed)
    if method == "bas":
        return optimize_switch_point(grid, initial, context, params, energy_params,
                                     fitness_fn=fitness_fn, soc=soc, max_evaluations=budget)
    if fitness_fn is None:
        fitness_fn = switch_fitness_fn(grid, context, params, energy_params, soc)
    land = SwitchLandscape(grid, initial, params.search_radius, fitness_fn, budget)
    rng = np.random.default_rng(params.seed)
    x0 = land.project(land.center)
    init_fit = land.evaluate(x0)
    best = [x0, init_fit]
    trace = [(x0.copy(), init_fit)]

    def take(p):
        fit = land.evaluate(p)
        trace.append((np.array(p, dtype=np.float64), fit))
        if fit.f < best[1].f:
            best[0], best[1] = np.array(p, dtype=np.float64), fit
        return fit

    if method == "exhaustive-grid":
        order = [land.cell_point(c) for c in _lattice_order(land)]
        i = 0
        while land.remaining >= 1 and order:
            take(order[i % len(order)])
            i += 1
    elif method == "random-search":
        while land.remaining >= 1:
            r = land.radius * math.sqrt(rng.uniform())
            th = rng.uniform(0.0, 2.0 * math.pi)
            take(land.project(land.center + np.array([r * math.cos(th), r * math.sin(th), 0.0])))
    else:
        _pso(land, rng, take, best)
    return _result(land, best[0], best[1], trace, method, init_fit)


def _pso(land: SwitchLandscape, rng, take, best, n_particles: int = 8,
         inertia: float = 0.7, c_personal: float = 1.5, c_social: float = 1.5):
    """Global-best particle swarm in the horizontal plane."""
    n = int(min(n_particles, max(land.remaining, 1)))
    r = land.radius * np.sqrt(rng.uniform(size=n))
    th = rng.uniform(0.0, 2.0 * math.pi, size=n)
    pos = np.stack([land.center[0] + r * np.cos(th), land.center[1] + r * np.sin(th)], axis=1)
    vel = np.zeros_like(pos)
    pbest = pos.copy()
    pbest_f = np.full(n, math.inf)
    while land.remaining >= 1:
        for i in range(n):
            if land.remaining < 1:
                return
            p = land.project([pos[i, 0], pos[i, 1], 0.0])
            pos[i] = p[:2]
            fit = take(p)
            if fit.f < pbest_f[i]:
                pbest_f[i] = fit.f
                pbest[i] = pos[i]
        gbest = best[0][:2]
        r1 = rng.uniform(size=(n, 1))
        r2 = rng.uniform(size=(n, 1))
        vel = inertia * vel + c_personal * r1 * (pbest - pos) + c_social * r2 * (gbest - pos)
        pos = pos + vel


def trace_to_csv(trace) -> str:
    """Optimizer trace as CSV: iteration, x, y, z, f, e_term, r_term."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "x", "y", "z", "f", "e_term", "r_term"])
    for i, (p, fit) in enumerate(trace):
        w.writerow([i, repr(float(p[0])), repr(float(p[1])), repr(float(p[2])),
                    repr(float(fit.f)), repr(float(fit.e_term)), repr(float(fit.r_term))])
    return buf.getvalue()
