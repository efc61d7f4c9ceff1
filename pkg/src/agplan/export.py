"""Plot-ready artifacts for planned paths: CSV, GeoJSON and a JSON summary.

CSV coordinates are local metres (x east along columns, y along rows, z
elevation).  GeoJSON coordinates are georeferenced through the grid header
when a grid is supplied, otherwise they fall back to the local frame.
All writers return text; :func:`write_atomic` puts it on disk.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

from .planner import PlannedPath, SmoothedPath, path_from_rows

PATH_COLUMNS = ("x", "y", "z", "mode", "cum_energy_J", "soc")


def _num(v) -> str:
    return repr(float(v))


def path_to_csv(path: PlannedPath) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PATH_COLUMNS)
    for n in path.nodes:
        x, y, z = n.position
        w.writerow([_num(x), _num(y), _num(z), n.mode, _num(n.cumulative_energy), _num(n.soc)])
    return buf.getvalue()


def path_from_csv(text: str, q_capacity: float, q_initial: float) -> PlannedPath:
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and set(PATH_COLUMNS) - set(rows[0]):
        raise ValueError(f"path CSV must have columns {PATH_COLUMNS}")
    return path_from_rows(rows, q_capacity, q_initial)


def soc_trace_to_csv(path: PlannedPath) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "distance_m", "mode", "soc"])
    dist = 0.0
    prev = None
    for i, n in enumerate(path.nodes):
        if prev is not None:
            dist += sum((a - b) ** 2 for a, b in zip(n.position, prev)) ** 0.5
        prev = n.position
        w.writerow([i, _num(dist), n.mode, _num(n.soc)])
    return buf.getvalue()


def _coord(grid, p):
    if grid is None:
        return [float(p[0]), float(p[1]), float(p[2])]
    wx, wy = grid.to_world(p[0], p[1])
    return [float(wx), float(wy), float(p[2])]


def path_to_geojson(path: PlannedPath, grid=None, smoothed: SmoothedPath = None) -> str:
    """One LineString feature per mode leg with ``mode`` and ``energy_J`` properties."""
    features = []
    nodes = path.nodes
    for i, (mode, first, last) in enumerate(path.mode_legs):
        lo = first - 1 if first > 0 else first
        energy = nodes[last].cumulative_energy - nodes[lo].cumulative_energy
        if smoothed is not None:
            per_leg = len(smoothed.samples) // len(smoothed.control_points)
            pts = smoothed.samples[i * per_leg:(i + 1) * per_leg]
        else:
            pts = [n.position for n in nodes[lo:last + 1]]
        coords = [_coord(grid, p) for p in pts]
        if len(coords) == 1:
            coords = coords * 2
        features.append({
            "type": "Feature",
            "geometry": {"type": "LineString", "coordinates": coords},
            "properties": {"leg": i, "mode": mode, "energy_J": energy,
                           "first_node": lo, "last_node": last},
        })
    return _dump({"type": "FeatureCollection", "features": features})


def switch_points_to_geojson(path: PlannedPath, grid=None) -> str:
    """Point per switch at the optimized location, with the initial point in properties."""
    features = []
    for s in path.switch_points:
        pos = path.nodes[s.index].position
        init = _cell_position(grid, s.initial_point, path.nodes[s.index].position)
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": _coord(grid, pos)},
            "properties": {
                "index": s.index,
                "direction": s.direction,
                "initial_cell": list(s.initial_point),
                "optimized_cell": list(s.optimized_point),
                "initial_coordinates": _coord(grid, init),
                "initial_fitness": _finite(s.initial_fitness),
                "optimized_fitness": _finite(s.optimized_fitness),
                "evaluations": s.evaluations,
            },
        })
    return _dump({"type": "FeatureCollection", "features": features})


def _finite(v):
    return v if v is not None and math.isfinite(v) else None


def _cell_position(grid, idx, fallback):
    if grid is None:
        return fallback
    return grid.position(idx)


def summary(path: PlannedPath, report=None, extra=None) -> dict:
    out = {
        "total_energy_J": path.total_energy,
        "total_distance_m": path.total_distance,
        "final_soc": path.nodes[-1].soc if path.nodes else None,
        "node_count": len(path.nodes),
        "switch_count": len(path.switch_points),
        "legs": [{"mode": m, "first_node": a, "last_node": b} for m, a, b in path.mode_legs],
        "switch_points": [
            {"index": s.index, "direction": s.direction, "initial_cell": list(s.initial_point),
             "optimized_cell": list(s.optimized_point)}
            for s in path.switch_points
        ],
        "flight_stages": [_collapse(st) for st in path.flight_stages],
        "flight_outcomes": list(path.flight_outcomes),
    }
    if report is not None:
        out["account"] = {
            "per_leg": [{"mode": l.mode, "energy_J": l.joules, "distance_m": l.meters}
                        for l in report.per_leg],
            "transform_count": report.transform_count,
        }
    if extra:
        out.update(extra)
    return out


def _collapse(stages) -> list:
    out = []
    for s in stages:
        if s is not None and (not out or out[-1] != s):
            out.append(s)
    return out


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def dump_json(obj) -> str:
    return _dump(obj)


def write_atomic(path, text) -> Path:
    """Write via a temporary file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = text.encode("utf-8") if isinstance(text, str) else text
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path
