"""Command-line interface: ``agplan {plan,compare,synth,energy-report}``.

Configuration layers (lowest first): built-in defaults, ``--config FILE``,
environment variables ``AGPLAN_<SECTION>__<KEY>`` (e.g.
``AGPLAN_BAS__ALPHA=800``), then repeated ``--set section.key=value`` flags.

Exit codes: 0 success, 2 usage error, 3 configuration or input error,
4 no path, 5 battery exhausted, 6 switch cap reached, 7 internal
accounting mismatch.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

from . import export
from .config import load_config
from .errors import (BatteryExhaustedError, ConfigError, ConsistencyError, ContractError,
                     IterationCapError, NoPathError, PlanningError, TerrainError)
from .harness import (bundled_scenario, build_report, emit_report, load_scenario,
                      run_method_comparison, run_scenario)
from .planner import account, plan, smooth
from .terrain import TERRAIN_KINDS, TerrainSpec, load_dem, synthesize_terrain, write_dem

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_NO_PATH = 4
EXIT_BATTERY = 5
EXIT_CAP = 6
EXIT_CONSISTENCY = 7


def _pair(text: str) -> tuple:
    try:
        col, row = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected COL,ROW, got {text!r}") from None
    return col, row


def _assignment(text: str) -> tuple:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    k, v = text.split("=", 1)
    return k.strip(), v.strip()


def _add_config_flags(p):
    p.add_argument("--config", help="config file of 'section.key = value' lines")
    p.add_argument("--set", dest="overrides", action="append", type=_assignment, default=[],
                   metavar="SECTION.KEY=VALUE", help="override one config value (repeatable)")


def _add_synth_flags(p, required_kind=False):
    defaults = TerrainSpec()
    p.add_argument("--kind", choices=TERRAIN_KINDS, required=required_kind,
                   help="synthetic terrain kind")
    for f in fields(TerrainSpec):
        if f.name == "kind":
            continue
        flag = "--" + f.name.replace("_", "-")
        if f.name == "center":
            p.add_argument(flag, type=_pair, metavar="COL,ROW", help="ring centre cell")
        elif f.name == "ridge_col":
            p.add_argument(flag, type=int, help="first crest column of a ridge")
        else:
            typ = int if isinstance(f.default, int) else float
            p.add_argument(flag, type=typ, help=f"default {getattr(defaults, f.name)}")


def _spec_from_args(args) -> TerrainSpec:
    kwargs = {"kind": args.kind}
    for f in fields(TerrainSpec):
        v = getattr(args, f.name, None)
        if f.name != "kind" and v is not None:
            kwargs[f.name] = v
    return TerrainSpec(**kwargs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agplan",
        description="Energy-aware drive/fly path planning over elevation grids.",
        epilog="Config values may also come from AGPLAN_<SECTION>__<KEY> environment variables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan one path and write CSV/GeoJSON/JSON artifacts")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--dem", help="ESRI ASCII grid file")
    src.add_argument("--synth", action="store_true", help="use a synthetic terrain (see --kind)")
    _add_synth_flags(p)
    p.add_argument("--start", type=_pair, required=True, metavar="COL,ROW")
    p.add_argument("--goal", type=_pair, required=True, metavar="COL,ROW")
    _add_config_flags(p)
    p.add_argument("--no-optimize", action="store_true", help="keep the initial switching points")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("compare", help="compare switching-point optimizers at equal budgets")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", help="scenario file (JSON or key = value)")
    src.add_argument("--bundled", help="name of a bundled scenario")
    p.add_argument("--budget", type=int, required=True, help="fitness evaluations per switch (>= 3)")
    p.add_argument("--seed", type=int, help="BAS/baseline seed (default: bas.seed)")
    p.add_argument("--format", choices=("json", "csv", "both"), default="both")
    p.add_argument("--include-timing", action="store_true",
                   help="add wall-clock timings (makes output non-reproducible)")
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("synth", help="write a synthetic terrain as an ASCII grid")
    _add_synth_flags(p, required_kind=True)
    p.add_argument("--out", required=True, help="output .asc file")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("energy-report", help="re-account the energy of an exported path CSV")
    p.add_argument("--path", required=True, help="path CSV written by 'plan'")
    _add_config_flags(p)
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_energy_report)
    return parser


def _config(args):
    return load_config(args.config, dict(args.overrides))


def _grid(args):
    if args.dem:
        with open(args.dem) as fh:
            return load_dem(fh)
    if not args.kind:
        raise ConfigError("--synth needs --kind")
    return synthesize_terrain(_spec_from_args(args))


def cmd_plan(args) -> int:
    grid = _grid(args)
    cfg = _config(args)
    out = Path(args.out)
    try:
        path = plan(grid, args.start, args.goal, cfg, optimize=not args.no_optimize)
    except (PlanningError, BatteryExhaustedError) as exc:
        if exc.partial_path is not None:
            _write_plan(out, exc.partial_path, grid, cfg, error=f"{type(exc).__name__}: {exc}")
        raise
    _write_plan(out, path, grid, cfg)
    print(f"{len(path.nodes)} nodes, {len(path.switch_points)} switch points, "
          f"{path.total_energy:.1f} J, final soc {path.nodes[-1].soc:.4f}; artifacts in {out}")
    return EXIT_OK


def _write_plan(out: Path, path, grid, cfg, error=None):
    resolved = cfg.resolve(grid)
    report = account(path, resolved.energy)
    export.write_atomic(out / "path.csv", export.path_to_csv(path))
    export.write_atomic(out / "path.geojson", export.path_to_geojson(path, grid))
    export.write_atomic(out / "soc_trace.csv", export.soc_trace_to_csv(path))
    export.write_atomic(out / "switch_points.geojson", export.switch_points_to_geojson(path, grid))
    if len(path.nodes) >= 2:
        sm = smooth(path, resolved.planner.samples_per_leg)
        export.write_atomic(out / "smoothed_path.geojson", export.path_to_geojson(path, grid, sm))
    extra = {"error": error, "config": {k: v for k, v in resolved.as_dict().items()}}
    export.write_atomic(out / "summary.json", export.dump_json(export.summary(path, report, extra)))


def cmd_compare(args) -> int:
    if args.budget < 3:
        raise _UsageError("--budget must be at least 3 (one BAS iteration)")
    sc = load_scenario(args.scenario) if args.scenario else bundled_scenario(args.bundled)
    cfg = _config(args)
    if args.seed is not None:
        cfg = cfg.with_overrides({"bas.seed": args.seed})
    entry = run_scenario(sc, cfg, include_timing=args.include_timing)
    rows = run_method_comparison(sc, args.budget, cfg, include_timing=args.include_timing)
    report = build_report([entry], rows)
    out = Path(args.out)
    formats = ("json", "csv") if args.format == "both" else (args.format,)
    for fmt in formats:
        export.write_atomic(out / f"comparison.{fmt}", emit_report(report, fmt))
    for r in rows:
        f = "n/a" if r["best_f"] is None else f"{r['best_f']:.1f}"
        e = "n/a" if r["path_energy_J"] is None else f"{r['path_energy_J']:.1f}"
        print(f"{r['method']:>16}: best F {f}, path energy {e} J")
    return EXIT_OK


def cmd_synth(args) -> int:
    grid = synthesize_terrain(_spec_from_args(args))
    export.write_atomic(args.out, write_dem(grid))
    print(f"wrote {grid.ncols}x{grid.nrows} grid to {args.out}")
    return EXIT_OK


def cmd_energy_report(args) -> int:
    cfg = _config(args)
    text = Path(args.path).read_text()
    path = export.path_from_csv(text, cfg.battery.q_capacity, cfg.battery.q_initial)
    report = account(path, cfg.energy)
    body = export.dump_json({
        "per_leg": [{"mode": l.mode, "energy_J": l.joules, "distance_m": l.meters}
                    for l in report.per_leg],
        "total_energy_J": report.total_energy,
        "total_distance_m": report.total_distance,
        "transform_count": report.transform_count,
        "final_soc": report.soc_trace[-1] if report.soc_trace else None,
        "soc_trace": report.soc_trace,
    })
    if args.out:
        export.write_atomic(args.out, body)
    else:
        sys.stdout.write(body)
    return EXIT_OK


class _UsageError(Exception):
    pass


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"agplan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ContractError, TerrainError, OSError, ValueError) as exc:
        print(f"agplan: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoPathError as exc:
        print(f"agplan: no path: {exc}", file=sys.stderr)
        return EXIT_NO_PATH
    except BatteryExhaustedError as exc:
        print(f"agplan: battery exhausted: {exc}", file=sys.stderr)
        return EXIT_BATTERY
    except IterationCapError as exc:
        print(f"agplan: {exc}", file=sys.stderr)
        return EXIT_CAP
    except ConsistencyError as exc:
        print(f"agplan: internal accounting mismatch: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY


if __name__ == "__main__":
    sys.exit(main())
