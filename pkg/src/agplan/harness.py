"""Desk-scale comparison harness.

Runs bundled or user-supplied scenarios with and without switching-point
optimization, compares BAS against three baselines at equal fitness budgets,
and serialises everything as a versioned JSON or CSV report.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .config import RunConfig
from .errors import AgplanError, ConfigError
from .planner import account, plan
from .switch_opt import METHODS, SwitchFitness, SwitchLandscape, baseline_optimize
from .terrain import GridIndex, TerrainGrid, TerrainSpec, load_dem, synthesize_terrain

SCHEMA = "agplan.comparison/1"


@dataclass(frozen=True)
class Scenario:
    name: str
    terrain: object
    start: tuple
    goal: tuple
    overrides: dict = field(default_factory=dict)

    def grid(self) -> TerrainGrid:
        if isinstance(self.terrain, TerrainGrid):
            return self.terrain
        if isinstance(self.terrain, TerrainSpec):
            return synthesize_terrain(self.terrain)
        with open(self.terrain) as fh:
            return load_dem(fh)

    def config(self, base: Optional[RunConfig] = None) -> RunConfig:
        return (base or RunConfig()).with_overrides(self.overrides)

    def validate(self):
        if tuple(self.start) == tuple(self.goal):
            raise ConfigError(f"scenario {self.name!r}: start and goal coincide")


# Ridges are built with a sloped approach flank: drivable (below the slope
# limit) but harder than the maneuverability index, so the takeoff counter
# fires partway up, and the BAS neighbourhood has real gradients to trade off.
_RIDGE_LIMITS = {"limits.m_index": 0.15}

BUNDLED = {
    "flat": Scenario("flat", TerrainSpec(kind="flat", ncols=20, nrows=20), (1, 1), (18, 18)),
    "ridge": Scenario(
        "ridge",
        TerrainSpec(kind="ridge", ncols=40, nrows=15, amplitude=60.0, ridge_col=22,
                    crest_width=2, flank_width=12, flank_slope=0.25),
        (2, 7), (37, 7), dict(_RIDGE_LIMITS)),
    "sloped-ridge": Scenario(
        "sloped-ridge",
        TerrainSpec(kind="ridge", ncols=40, nrows=15, amplitude=70.0, ridge_col=22,
                    crest_width=2, flank_width=12, flank_slope=0.3, back_flank_width=6),
        (2, 7), (37, 7), dict(_RIDGE_LIMITS)),
    "ring": Scenario(
        "ring",
        TerrainSpec(kind="ring", ncols=31, nrows=31, amplitude=60.0, crest_width=2,
                    inner_radius=3, flank_width=9, flank_slope=0.25),
        (1, 15), (15, 15), dict(_RIDGE_LIMITS)),
    "low-altitude": Scenario(
        "low-altitude",
        TerrainSpec(kind="ridge", ncols=40, nrows=15, amplitude=40.0, ridge_col=22,
                    crest_width=2, flank_width=10, flank_slope=0.2, roughness=1.0, seed=1),
        (2, 7), (37, 7), dict(_RIDGE_LIMITS)),
    "high-altitude": Scenario(
        "high-altitude",
        TerrainSpec(kind="ridge", ncols=40, nrows=15, amplitude=80.0, ridge_col=22, base=800.0,
                    crest_width=3, flank_width=12, flank_slope=0.25, roughness=2.0, seed=2),
        (2, 7), (37, 7), dict(_RIDGE_LIMITS)),
    "composite": Scenario(
        "composite",
        TerrainSpec(kind="ridge", ncols=40, nrows=20, amplitude=60.0, ridge_col=20, base=300.0,
                    crest_width=2, flank_width=11, flank_slope=0.25, back_flank_width=5,
                    roughness=3.0, seed=3),
        (2, 4), (37, 15), dict(_RIDGE_LIMITS)),
}


def bundled_scenario(name: str) -> Scenario:
    try:
        return BUNDLED[name]
    except KeyError:
        raise ConfigError(f"unknown bundled scenario {name!r}; choose from {sorted(BUNDLED)}") from None


def _parse_pair(value) -> tuple:
    if isinstance(value, str):
        value = [v for v in value.replace(";", ",").split(",") if v.strip()]
    try:
        col, row = (int(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a 'col,row' pair, got {value!r}") from None
    return col, row


def _spec_from(values: dict) -> TerrainSpec:
    known = {f.name: f for f in fields(TerrainSpec)}
    kwargs = {}
    for key, raw in values.items():
        if key not in known:
            raise ConfigError(f"unknown synth key {key!r}")
        default = known[key].default
        if key == "center" and isinstance(raw, str):
            raw = _parse_pair(raw)
        elif isinstance(raw, str):
            if key == "kind":
                pass
            elif isinstance(default, int) or key == "ridge_col":
                raw = int(raw)
            else:
                raw = float(raw)
        kwargs[key] = raw
    return TerrainSpec(**kwargs)


def scenario_from_dict(data: dict, base_dir: Path = Path(".")) -> Scenario:
    """Build a scenario from a parsed JSON object or flat key/value mapping.

    Terrain is either ``terrain`` (ASCII-grid path, relative to the file),
    ``bundled`` (name of a bundled scenario) or ``synth`` (a mapping, or flat
    ``synth.<key>`` entries).  Remaining dotted keys are config overrides,
    also accepted under ``config``.
    """
    data = dict(data)
    if "bundled" in data:
        sc = bundled_scenario(str(data.pop("bundled")))
        overrides = dict(sc.overrides)
        overrides.update(data.pop("config", {}) or {})
        overrides.update({k: v for k, v in data.items() if "." in k})
        return replace(sc, overrides=overrides)
    name = str(data.pop("name", "scenario"))
    synth = dict(data.pop("synth", {}) or {})
    for key in [k for k in data if k.startswith("synth.")]:
        synth[key[len("synth."):]] = data.pop(key)
    if "terrain" in data:
        terrain = str(base_dir / str(data.pop("terrain")))
    elif synth:
        try:
            terrain = _spec_from(synth)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad synth spec: {exc}") from exc
    else:
        raise ConfigError("scenario needs 'terrain', 'synth' or 'bundled'")
    if "start" not in data or "goal" not in data:
        raise ConfigError("scenario needs 'start' and 'goal'")
    start, goal = _parse_pair(data.pop("start")), _parse_pair(data.pop("goal"))
    overrides = dict(data.pop("config", {}) or {})
    for key in list(data):
        if "." in key:
            overrides[key] = data.pop(key)
    if data:
        raise ConfigError(f"unknown scenario keys: {sorted(data)}")
    sc = Scenario(name, terrain, start, goal, overrides)
    sc.validate()
    return sc


def load_scenario(path) -> Scenario:
    """Read a scenario file: JSON, or flat ``key = value`` lines."""
    path = Path(path)
    text = path.read_text()
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    else:
        data = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            k, v = line.split("=", 1)
            data[k.strip()] = v.strip()
    return scenario_from_dict(data, path.parent)


# -- runs ----------------------------------------------------------------------------

def _plan_record(grid, sc, cfg, optimize, optimizer=None):
    p = plan(grid, sc.start, sc.goal, cfg, optimize=optimize, optimizer=optimizer)
    account(p, cfg.resolve(grid).energy)
    return p


def run_scenario(scenario: Scenario, config: Optional[RunConfig] = None,
                 include_timing: bool = False) -> dict:
    """Plan with and without switching-point optimization and compare energies.

    Planner failures are recorded in the ``error`` field rather than raised.
    """
    entry = {"name": scenario.name, "error": None}
    try:
        grid = scenario.grid()
        cfg = scenario.config(config)
        t0 = time.perf_counter()
        base = _plan_record(grid, scenario, cfg, False)
        t1 = time.perf_counter()
        opt = _plan_record(grid, scenario, cfg, True)
        t2 = time.perf_counter()
    except AgplanError as exc:
        entry["error"] = f"{type(exc).__name__}: {exc}"
        return entry
    savings = 0.0 if base.total_energy == 0 else 1.0 - opt.total_energy / base.total_energy
    entry.update({
        "energy_unoptimized_J": base.total_energy,
        "energy_optimized_J": opt.total_energy,
        "savings_fraction": savings,
        "switch_count": len(opt.switch_points),
        "switch_count_unoptimized": len(base.switch_points),
        "switch_points": [
            {"direction": s.direction, "initial_cell": list(s.initial_point),
             "optimized_cell": list(s.optimized_point)}
            for s in opt.switch_points
        ],
        "soc_trace_unoptimized": base.soc_trace,
        "soc_trace_optimized": opt.soc_trace,
    })
    if include_timing:
        entry["wall_time_s"] = {"unoptimized": t1 - t0, "optimized": t2 - t1}
    return entry


def run_method_comparison(scenario: Scenario, budget: int, config: Optional[RunConfig] = None,
                          methods=METHODS, seed: Optional[int] = None,
                          include_timing: bool = False) -> list:
    """Run every method with ``budget`` fitness evaluations per switching point.

    Each method replaces BAS inside the planner, so the reported path energy
    is the downstream consequence of its choices.  Best F and R come from the
    first takeoff point; every switch spends exactly ``budget`` evaluations.
    """
    if budget < 3:
        raise ConfigError("budget must be at least 3 (one BAS iteration)")
    grid = scenario.grid()
    cfg = scenario.config(config)
    if seed is not None:
        cfg = cfg.with_overrides({"bas.seed": seed})
    rows = []
    for method in methods:
        results = []

        def optimizer(g, initial, context, bas_params, energy_params, soc, switch_index):
            res = baseline_optimize(method, budget, g, initial, context, bas_params, energy_params,
                                    soc=soc, seed=bas_params.seed + switch_index)
            results.append(res)
            return res

        row = {"scenario": scenario.name, "method": method, "budget": budget,
               "seed": cfg.bas.seed, "error": None}
        t0 = time.perf_counter()
        try:
            p = _plan_record(grid, scenario, cfg, True, optimizer)
            row["path_energy_J"] = p.total_energy
        except AgplanError as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
            row["path_energy_J"] = None
        elapsed = time.perf_counter() - t0
        first = results[0] if results else None
        row.update({
            "switches_optimized": len(results),
            "evaluations": [r.evaluations for r in results],
            "iterations": [bas_iterations(r.evaluations) for r in results] if method == "bas" else None,
            "best_f": _finite(first.fitness.f) if first else None,
            "best_r": _finite(first.fitness.r_term) if first else None,
            "mean_r": (_finite(float(np.mean([r.fitness.r_term for r in results])))
                       if results else None),
            "point": list(first.point) if first else None,
        })
        if include_timing:
            row["wall_time_s"] = elapsed
        rows.append(row)
    return rows


def bas_iterations(evaluations: int) -> int:
    """Full BAS iterations within a budget that also pays for the incumbent."""
    return max(evaluations - 1, 0) // 3


def _finite(v):
    return v if v is not None and math.isfinite(v) else None


def bowl_fitness(grid: TerrainGrid, optimum, floor: float = 1000.0, curvature: float = 1.0):
    """Unimodal test fitness ``floor + curvature * d^2`` on the nearest cell."""
    ox, oy = optimum[0] * grid.cell_size, optimum[1] * grid.cell_size

    def f(p):
        idx = grid.nearest_index(p[0], p[1])
        d2 = (idx.col * grid.cell_size - ox) ** 2 + (idx.row * grid.cell_size - oy) ** 2
        return SwitchFitness(floor + curvature * d2, 0.0, floor + curvature * d2)
    return f


def run_bowl_comparison(seed: int, budget: Optional[int] = None, size: int = 41,
                        config: Optional[RunConfig] = None) -> dict:
    """Four methods on a flat grid with a bowl fitness whose minimum is off-centre.

    The optimum cell is drawn from the seed inside the search disc.  With the
    default budget every in-disc cell can be enumerated exactly once.
    """
    grid = synthesize_terrain(TerrainSpec(kind="flat", ncols=size, nrows=size))
    cfg = (config or RunConfig()).resolve(grid)
    params = replace(cfg.bas, seed=seed)
    center = GridIndex(size // 2, size // 2)
    rng = np.random.default_rng([seed, 7])
    reach = int(params.search_radius // grid.cell_size)
    while True:
        off = rng.integers(-reach, reach + 1, size=2)
        if math.hypot(*off) * grid.cell_size <= params.search_radius:
            break
    optimum = GridIndex(center.col + int(off[0]), center.row + int(off[1]))
    fn = bowl_fitness(grid, optimum)
    land = SwitchLandscape(grid, center, params.search_radius, fn)
    full = len(land.cells())
    budget = full if budget is None else budget
    out = {"seed": seed, "optimum": list(optimum), "budget": budget, "cells": full,
           "optimum_f": fn(grid.position(optimum)).f, "methods": {}}
    for method in METHODS:
        res = baseline_optimize(method, budget, grid, center, None, params, cfg.energy,
                                fitness_fn=fn, seed=seed)
        out["methods"][method] = {"best_f": res.fitness.f, "evaluations": res.evaluations,
                                  "point": list(res.point)}
    return out


def build_report(scenarios=(), methods=()) -> dict:
    return {"schema": SCHEMA, "scenarios": list(scenarios), "methods": list(methods)}


# -- serialisation -------------------------------------------------------------------

def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        if not obj:
            yield prefix, "{}"
        for k in sorted(obj):
            if "." in str(k):
                raise ValueError(f"report keys may not contain '.': {k!r}")
            yield from _flatten(obj[k], f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list):
        if not obj:
            yield prefix, "[]"
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}.{i}" if prefix else str(i))
    else:
        yield prefix, json.dumps(obj, allow_nan=False)


def _unflatten(pairs) -> dict:
    pairs = list(pairs)
    if len(pairs) == 1 and pairs[0][0] == "":
        return json.loads(pairs[0][1])
    root = {}
    for path, raw in pairs:
        keys = path.split(".")
        node = root
        for k in keys[:-1]:
            node = node.setdefault(k, {})
        node[keys[-1]] = json.loads(raw)
    return _listify(root)


def _listify(node):
    if not isinstance(node, dict):
        return node
    out = {k: _listify(v) for k, v in node.items()}
    if out and all(k.isdigit() for k in out):
        return [out[str(i)] for i in range(len(out))]
    return out


def emit_report(report: dict, fmt: str = "json") -> bytes:
    """Serialise a report losslessly.

    ``json`` is the report object itself (sorted keys, 2-space indent).
    ``csv`` has two columns, ``path`` and ``value``: ``path`` is the dotted
    location of a leaf (list positions are integers) and ``value`` its JSON
    encoding; empty containers appear as ``[]`` or ``{}``.
    """
    if fmt == "json":
        return (json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n").encode()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["path", "value"])
        for path, value in _flatten(report):
            w.writerow([path, value])
        return buf.getvalue().encode()
    raise ValueError(f"unknown report format {fmt!r}; expected 'json' or 'csv'")


def parse_report(data: bytes, fmt: str = "json") -> dict:
    text = data.decode() if isinstance(data, (bytes, bytearray)) else data
    if fmt == "json":
        return json.loads(text)
    if fmt == "csv":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["path", "value"]:
            raise ValueError("report CSV must start with a 'path,value' header")
        return _unflatten(rows[1:])
    raise ValueError(f"unknown report format {fmt!r}; expected 'json' or 'csv'")
