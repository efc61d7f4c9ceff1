import json

import pytest

from agplan.errors import ConfigError
from agplan.harness import (BUNDLED, METHODS, SCHEMA, Scenario, bas_iterations, build_report,
                            bundled_scenario, emit_report, load_scenario, parse_report,
                            run_bowl_comparison, run_method_comparison, run_scenario)
from agplan.terrain import TerrainSpec, write_dem, synthesize_terrain
from conftest import GOLDEN

GOLDEN_BUDGET = 61


def golden_report():
    sc = bundled_scenario("ridge")
    return build_report([run_scenario(sc)], run_method_comparison(sc, GOLDEN_BUDGET))


def test_flat_has_zero_savings():
    e = run_scenario(BUNDLED["flat"])
    assert e["error"] is None and e["savings_fraction"] == 0.0 and e["switch_count"] == 0


def test_ridge_savings_and_definition():
    e = run_scenario(BUNDLED["ridge"])
    assert e["savings_fraction"] >= 0
    assert e["savings_fraction"] == 1 - e["energy_optimized_J"] / e["energy_unoptimized_J"]
    assert e["switch_count"] == 2


def test_failures_are_recorded():
    wall = Scenario("wall", TerrainSpec(kind="ridge", ncols=20, nrows=7, amplitude=40, ridge_col=10),
                    (1, 3), (18, 3))
    e = run_scenario(wall)
    assert e["error"].startswith("NoPathError")


def test_method_comparison_parity_and_iterations():
    rows = run_method_comparison(BUNDLED["ridge"], 31)
    assert [r["method"] for r in rows] == list(METHODS)
    for r in rows:
        assert r["error"] is None
        assert r["evaluations"] and all(e == 31 for e in r["evaluations"])
    assert rows[0]["iterations"] == [10] * len(rows[0]["evaluations"])
    assert bas_iterations(301) == 100 and bas_iterations(3) == 0


def test_budget_floor():
    with pytest.raises(ConfigError):
        run_method_comparison(BUNDLED["ridge"], 2)


def test_bowl_comparison_full_enumeration():
    out = run_bowl_comparison(0)
    assert out["budget"] == out["cells"]
    m = out["methods"]
    assert m["exhaustive-grid"]["best_f"] == out["optimum_f"]
    assert all(v["evaluations"] == out["budget"] for v in m.values())


def test_empty_report_round_trips():
    for fmt in ("json", "csv"):
        data = emit_report(build_report(), fmt)
        assert parse_report(data, fmt) == {"schema": SCHEMA, "scenarios": [], "methods": []}
    assert parse_report(emit_report({}, "csv"), "csv") == {}


def test_json_csv_encode_identical_data():
    report = golden_report()
    j = parse_report(emit_report(report, "json"), "json")
    c = parse_report(emit_report(report, "csv"), "csv")
    assert j == c == json.loads(json.dumps(report))


def test_report_format_errors():
    with pytest.raises(ValueError):
        emit_report({}, "xml")
    with pytest.raises(ValueError):
        parse_report(b"a,b\n", "csv")


def test_golden_ridge_report():
    data = emit_report(golden_report(), "json")
    assert data == emit_report(golden_report(), "json")
    assert data == (GOLDEN / "ridge_comparison.json").read_bytes()


def test_scenario_files(tmp_path):
    grid = synthesize_terrain(TerrainSpec(ncols=8, nrows=8))
    (tmp_path / "t.asc").write_text(write_dem(grid))
    (tmp_path / "a.json").write_text(json.dumps({
        "name": "file", "terrain": "t.asc", "start": [0, 0], "goal": [7, 7],
        "config": {"bas.seed": 3}}))
    sc = load_scenario(tmp_path / "a.json")
    assert sc.grid().ncols == 8 and sc.overrides == {"bas.seed": 3}
    (tmp_path / "b.cfg").write_text(
        "name = kv\nsynth.kind = ridge\nsynth.ncols = 30\nsynth.amplitude = 50\n"
        "start = 1,3\ngoal = 28,3\nlimits.m_index = 0.2\n")
    sc = load_scenario(tmp_path / "b.cfg")
    assert sc.terrain == TerrainSpec(kind="ridge", ncols=30, amplitude=50.0)
    assert sc.start == (1, 3) and sc.overrides == {"limits.m_index": "0.2"}
    (tmp_path / "c.cfg").write_text("bundled = ridge\nbas.seed = 5\n")
    sc = load_scenario(tmp_path / "c.cfg")
    assert sc.name == "ridge" and sc.overrides["bas.seed"] == "5"


@pytest.mark.parametrize("text", ["name = x\nstart = 1,1\ngoal = 2,2\n",
                                  "synth.kind = flat\nstart = 1,1\n",
                                  "synth.kind = flat\nstart = 1,1\ngoal = 1,1\n",
                                  "synth.kind = flat\nstart = a,b\ngoal = 1,1\n",
                                  "synth.kind = flat\nstart = 1,1\ngoal = 2,2\ncolour = red\n",
                                  "synth.wobble = 1\nstart = 1,1\ngoal = 2,2\n",
                                  "bundled = everest\n"])
def test_bad_scenario_files(tmp_path, text):
    (tmp_path / "s.cfg").write_text(text)
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "s.cfg")
