"""Input checks shared by the estimator wrapper and the CLI."""
from __future__ import annotations

from pathlib import Path

from .errors import ContractError
from .ground import MobilityLimits, feasible_node
from .terrain import GridIndex, TerrainGrid, TerrainSpec, load_dem, synthesize_terrain


def check_terrain(terrain) -> TerrainGrid:
    """Accept a grid, a synth spec, or a path to an ASCII grid."""
    if isinstance(terrain, TerrainGrid):
        return terrain
    if isinstance(terrain, TerrainSpec):
        return synthesize_terrain(terrain)
    if isinstance(terrain, (str, Path)):
        with open(terrain) as fh:
            return load_dem(fh)
    raise TypeError(f"expected TerrainGrid, TerrainSpec or a DEM path, got {type(terrain).__name__}")


def check_index(grid: TerrainGrid, idx, name: str = "cell",
                limits: MobilityLimits = None) -> GridIndex:
    try:
        col, row = idx
        idx = GridIndex(int(col), int(row))
    except (TypeError, ValueError):
        raise ContractError(f"{name} must be a (col, row) pair, got {idx!r}") from None
    if not grid.in_bounds(idx):
        raise ContractError(f"{name} {tuple(idx)} is outside the {grid.ncols}x{grid.nrows} grid")
    if limits is not None and not feasible_node(grid, idx, limits):
        raise ContractError(f"{name} {tuple(idx)} is not a drivable cell")
    return idx


def check_pairs(grid: TerrainGrid, pairs, limits: MobilityLimits = None) -> list:
    """Normalise an iterable of ``(start, goal)`` pairs."""
    out = []
    for i, pair in enumerate(pairs):
        try:
            start, goal = pair
        except (TypeError, ValueError):
            raise ContractError(f"pair {i} must be (start, goal), got {pair!r}") from None
        out.append((check_index(grid, start, f"pair {i} start", limits),
                    check_index(grid, goal, f"pair {i} goal", limits)))
    return out
