import csv
import io
import json
import os

import pytest

from agplan import export
from agplan.planner import account, smooth


def test_path_csv_columns_and_round_trip(ridge_plans):
    grid, cfg, _, p = ridge_plans
    text = export.path_to_csv(p)
    rows = list(csv.DictReader(io.StringIO(text)))
    assert list(rows[0]) == ["x", "y", "z", "mode", "cum_energy_J", "soc"]
    assert len(rows) == len(p.nodes)
    back = export.path_from_csv(text, cfg.battery.q_capacity, cfg.battery.q_initial)
    assert [n.position for n in back.nodes] == [n.position for n in p.nodes]
    assert [n.cumulative_energy for n in back.nodes] == [n.cumulative_energy for n in p.nodes]
    assert account(back, cfg.energy).total_energy == pytest.approx(p.total_energy, rel=1e-12)


def test_path_csv_missing_column():
    with pytest.raises(ValueError):
        export.path_from_csv("x,y,z\n1,2,3\n", 1.0, 1.0)


def test_geojson_legs(ridge_plans):
    grid, _, _, p = ridge_plans
    fc = json.loads(export.path_to_geojson(p, grid))
    assert fc["type"] == "FeatureCollection"
    modes = [f["properties"]["mode"] for f in fc["features"]]
    assert modes == ["drive", "fly", "drive"]
    total = sum(f["properties"]["energy_J"] for f in fc["features"])
    assert total == pytest.approx(p.total_energy)
    first = fc["features"][0]["geometry"]["coordinates"][0]
    wx, wy = grid.to_world(*p.nodes[0].position[:2])
    assert first[:2] == [wx, wy]
    # consecutive legs share their switch point
    a = fc["features"][0]["geometry"]["coordinates"][-1]
    b = fc["features"][1]["geometry"]["coordinates"][0]
    assert a == b


def test_smoothed_geojson(ridge_plans):
    grid, _, _, p = ridge_plans
    sm = smooth(p, 20)
    fc = json.loads(export.path_to_geojson(p, grid, sm))
    assert [len(f["geometry"]["coordinates"]) for f in fc["features"]] == [20, 20, 20]


def test_switch_point_geojson(ridge_plans):
    grid, _, _, p = ridge_plans
    fc = json.loads(export.switch_points_to_geojson(p, grid))
    assert len(fc["features"]) == 2
    props = fc["features"][0]["properties"]
    assert props["direction"] == "ground->air"
    assert props["optimized_cell"] == list(p.switch_points[0].optimized_point)
    assert props["initial_cell"] == list(p.switch_points[0].initial_point)
    assert props["optimized_fitness"] <= props["initial_fitness"]


def test_soc_trace_csv(ridge_plans):
    _, _, _, p = ridge_plans
    rows = list(csv.DictReader(io.StringIO(export.soc_trace_to_csv(p))))
    assert [float(r["soc"]) for r in rows] == p.soc_trace
    d = [float(r["distance_m"]) for r in rows]
    assert d == sorted(d) and d[-1] == pytest.approx(p.total_distance)


def test_summary_is_json(ridge_plans):
    grid, cfg, _, p = ridge_plans
    s = json.loads(export.dump_json(export.summary(p, account(p, cfg.energy))))
    assert s["switch_count"] == 2 and s["account"]["transform_count"] == 2
    assert s["flight_stages"] == [["takeoff", "escape", "landing"]]


def test_write_atomic(tmp_path):
    target = tmp_path / "sub" / "f.txt"
    export.write_atomic(target, "one")
    export.write_atomic(target, b"two")
    assert target.read_text() == "two"
    assert os.listdir(target.parent) == ["f.txt"]
