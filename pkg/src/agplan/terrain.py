"""Digital elevation grids: ASCII-grid I/O, synthetic terrains and slope queries.

Grid cells are addressed by ``GridIndex(col, row)``.  Row 0 is the first data
row of the ASCII file (the northern edge).  Planning works in a local metric
frame where ``x = col * cell_size`` and ``y = row * cell_size``; use
:meth:`TerrainGrid.to_world` to get georeferenced cell centres.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Optional, Union

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import DemParseError, DimensionError, NodataError, OutOfBoundsError, TerrainError

DEFAULT_NODATA = -9999.0

NEIGHBOR_OFFSETS = tuple(
    (dc, dr) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dc, dr) != (0, 0)
)


class GridIndex(NamedTuple):
    col: int
    row: int


class TerrainGradient(NamedTuple):
    gx: float
    gy: float
    gz: float


@dataclass(frozen=True, eq=False)
class TerrainGrid:
    """Immutable raster DEM.

    ``elevations`` has shape ``(nrows, ncols)``; cells equal to
    ``nodata_sentinel`` are treated as missing and are never traversable.
    """

    ncols: int
    nrows: int
    cell_size: float
    origin_x: float
    origin_y: float
    elevations: np.ndarray
    nodata_sentinel: float = DEFAULT_NODATA
    origin_is_center: bool = False

    def __post_init__(self):
        if self.ncols < 2 or self.nrows < 2:
            raise DimensionError(f"grid must be at least 2x2, got {self.ncols}x{self.nrows}")
        if not self.cell_size > 0:
            raise TerrainError(f"cell_size must be positive, got {self.cell_size}")
        elev = np.array(self.elevations, dtype=np.float64)
        if elev.shape != (self.nrows, self.ncols):
            raise DimensionError(
                f"elevations shape {elev.shape} does not match nrows={self.nrows}, ncols={self.ncols}"
            )
        valid = elev != self.nodata_sentinel
        if not np.all(np.isfinite(elev[valid])):
            raise TerrainError("non-nodata elevations must be finite")
        elev.setflags(write=False)
        object.__setattr__(self, "elevations", elev)

    # -- masks and derived rasters -------------------------------------------------

    @cached_property
    def nodata_mask(self) -> np.ndarray:
        mask = self.elevations == self.nodata_sentinel
        mask.setflags(write=False)
        return mask

    @cached_property
    def _gradients(self):
        z = np.where(self.nodata_mask, np.nan, self.elevations)
        c = self.cell_size
        gx = np.empty_like(z)
        gy = np.empty_like(z)
        gx[:, 1:-1] = (z[:, 2:] - z[:, :-2]) / (2.0 * c)
        gx[:, 0] = (z[:, 1] - z[:, 0]) / c
        gx[:, -1] = (z[:, -1] - z[:, -2]) / c
        gy[1:-1, :] = (z[2:, :] - z[:-2, :]) / (2.0 * c)
        gy[0, :] = (z[1, :] - z[0, :]) / c
        gy[-1, :] = (z[-1, :] - z[-2, :]) / c
        gz = np.hypot(gx, gy)
        for a in (gx, gy, gz):
            a.setflags(write=False)
        return gx, gy, gz

    @property
    def gx(self) -> np.ndarray:
        """Slope along +x (increasing column); NaN where the stencil touches nodata."""
        return self._gradients[0]

    @property
    def gy(self) -> np.ndarray:
        return self._gradients[1]

    @property
    def gz(self) -> np.ndarray:
        return self._gradients[2]

    @property
    def max_elevation(self) -> float:
        valid = self.elevations[~self.nodata_mask]
        return float(valid.max()) if valid.size else 0.0

    # -- index helpers ---------------------------------------------------------------

    def in_bounds(self, idx) -> bool:
        col, row = idx
        return 0 <= col < self.ncols and 0 <= row < self.nrows

    def is_nodata(self, idx) -> bool:
        return bool(self.nodata_mask[idx[1], idx[0]])

    def neighbors(self, idx):
        """8-connected in-bounds neighbours in a fixed order."""
        col, row = idx
        for dc, dr in NEIGHBOR_OFFSETS:
            c, r = col + dc, row + dr
            if 0 <= c < self.ncols and 0 <= r < self.nrows:
                yield GridIndex(c, r)

    def position(self, idx) -> tuple:
        """Local metric (x, y, z) of a cell centre on the terrain surface."""
        return (
            idx[0] * self.cell_size,
            idx[1] * self.cell_size,
            elevation_at(self, idx),
        )

    def nearest_index(self, x: float, y: float) -> GridIndex:
        col = int(round(x / self.cell_size))
        row = int(round(y / self.cell_size))
        return GridIndex(min(max(col, 0), self.ncols - 1), min(max(row, 0), self.nrows - 1))

    def surface_height(self, x: float, y: float) -> float:
        """Terrain height at a local (x, y), nearest-cell sampling."""
        return elevation_at(self, self.nearest_index(x, y))

    def to_world(self, x: float, y: float) -> tuple:
        """Map local metric coordinates to georeferenced coordinates."""
        half = 0.0 if self.origin_is_center else 0.5 * self.cell_size
        wx = self.origin_x + half + x
        wy = self.origin_y + half + (self.nrows - 1) * self.cell_size - y
        return wx, wy


def _check_index(grid: TerrainGrid, idx) -> GridIndex:
    idx = GridIndex(int(idx[0]), int(idx[1]))
    if not grid.in_bounds(idx):
        raise OutOfBoundsError(
            f"index (col={idx.col}, row={idx.row}) outside {grid.ncols}x{grid.nrows} grid"
        )
    return idx


def elevation_at(grid: TerrainGrid, idx) -> float:
    idx = _check_index(grid, idx)
    if grid.nodata_mask[idx.row, idx.col]:
        raise NodataError(f"cell (col={idx.col}, row={idx.row}) is nodata")
    return float(grid.elevations[idx.row, idx.col])


def gradient_at(grid: TerrainGrid, idx) -> TerrainGradient:
    """Finite-difference slope components at a cell.

    Central differences inside the grid, one-sided on the border.  ``gz`` is
    the planar slope magnitude ``hypot(gx, gy)``.
    """
    idx = _check_index(grid, idx)
    gx = grid.gx[idx.row, idx.col]
    gy = grid.gy[idx.row, idx.col]
    if math.isnan(gx) or math.isnan(gy):
        raise NodataError(f"gradient stencil at (col={idx.col}, row={idx.row}) touches nodata")
    return TerrainGradient(float(gx), float(gy), float(grid.gz[idx.row, idx.col]))


# -- ASCII grid I/O ------------------------------------------------------------------

_REQUIRED_KEYS = ("ncols", "nrows", "cellsize")


def _as_text(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        return source.decode("ascii")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("ascii") if isinstance(data, (bytes, bytearray)) else data


def load_dem(source: Union[str, bytes, io.IOBase]) -> TerrainGrid:
    """Parse an ESRI ASCII grid from text, bytes, or a readable stream."""
    lines = [ln for ln in _as_text(source).splitlines() if ln.strip()]
    header = {}
    pos = 0
    while pos < len(lines):
        parts = lines[pos].split()
        if not parts[0][0].isalpha():
            break
        if len(parts) != 2:
            raise DemParseError(f"malformed header line for key '{parts[0]}': {lines[pos]!r}")
        header[parts[0].lower()] = (parts[0], parts[1])
        pos += 1

    def number(key, cast):
        if key not in header:
            raise DemParseError(f"missing header key '{key}'")
        name, raw = header[key]
        try:
            return cast(raw)
        except ValueError:
            raise DemParseError(f"header key '{name}' has non-numeric value {raw!r}") from None

    for key in _REQUIRED_KEYS:
        number(key, float)
    ncols = number("ncols", int)
    nrows = number("nrows", int)
    cell_size = number("cellsize", float)
    if "xllcorner" in header or "yllcorner" in header:
        origin_x, origin_y, centered = number("xllcorner", float), number("yllcorner", float), False
    elif "xllcenter" in header or "yllcenter" in header:
        origin_x, origin_y, centered = number("xllcenter", float), number("yllcenter", float), True
    else:
        raise DemParseError("missing header key 'xllcorner'")
    nodata = number("nodata_value", float) if "nodata_value" in header else DEFAULT_NODATA
    known = {"ncols", "nrows", "cellsize", "xllcorner", "yllcorner", "xllcenter", "yllcenter", "nodata_value"}
    for key, (name, _) in header.items():
        if key not in known:
            raise DemParseError(f"unknown header key '{name}'")

    rows = lines[pos:]
    if len(rows) != nrows:
        raise DimensionError(f"header declares nrows={nrows} but found {len(rows)} data rows")
    elev = np.empty((nrows, ncols), dtype=np.float64)
    for r, line in enumerate(rows):
        vals = line.split()
        if len(vals) != ncols:
            raise DimensionError(f"row {r} has {len(vals)} values, header declares ncols={ncols}")
        for c, tok in enumerate(vals):
            try:
                elev[r, c] = float(tok)
            except ValueError:
                raise DemParseError(f"non-numeric cell {tok!r} at row {r}, col {c}") from None
    return TerrainGrid(ncols, nrows, cell_size, origin_x, origin_y, elev, nodata, centered)


def _fmt(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def write_dem(grid: TerrainGrid) -> str:
    """Serialise to ASCII-grid text; values round-trip bit-identically."""
    xkey, ykey = ("xllcenter", "yllcenter") if grid.origin_is_center else ("xllcorner", "yllcorner")
    out = [
        f"ncols {grid.ncols}",
        f"nrows {grid.nrows}",
        f"{xkey} {_fmt(grid.origin_x)}",
        f"{ykey} {_fmt(grid.origin_y)}",
        f"cellsize {_fmt(grid.cell_size)}",
        f"NODATA_value {_fmt(grid.nodata_sentinel)}",
    ]
    for row in grid.elevations:
        out.append(" ".join(_fmt(v) for v in row))
    return "\n".join(out) + "\n"


# -- synthetic terrain ---------------------------------------------------------------

TERRAIN_KINDS = ("flat", "ramp", "ridge", "random-smooth", "ring")


@dataclass(frozen=True)
class TerrainSpec:
    """Recipe for :func:`synthesize_terrain`.

    ``ridge`` builds a band of height ``amplitude`` running along y at column
    ``ridge_col`` (default: middle), ``crest_width`` cells wide, optionally
    preceded by a linear flank of ``flank_width`` cells rising at
    ``flank_slope`` and followed by a mirrored flank of ``back_flank_width``
    cells.  ``ring`` is the same profile wrapped radially around
    ``center``.  ``roughness`` adds a smooth random overlay of that amplitude
    to any kind.
    """

    kind: str = "flat"
    ncols: int = 20
    nrows: int = 20
    cell_size: float = 12.0
    amplitude: float = 0.0
    seed: int = 0
    base: float = 0.0
    sigma: float = 3.0
    roughness: float = 0.0
    ridge_col: Optional[int] = None
    crest_width: int = 2
    flank_width: int = 0
    flank_slope: float = 0.0
    back_flank_width: int = 0
    center: Optional[tuple] = None
    inner_radius: float = 3.0

    def __post_init__(self):
        if self.kind not in TERRAIN_KINDS:
            raise TerrainError(f"unknown terrain kind {self.kind!r}; expected one of {TERRAIN_KINDS}")
        if self.ncols < 2 or self.nrows < 2:
            raise DimensionError("synthetic terrain needs at least 2x2 cells")
        if self.amplitude < 0 or self.roughness < 0:
            raise TerrainError("amplitude and roughness must be non-negative")
        if self.cell_size <= 0:
            raise TerrainError("cell_size must be positive")
        top = self.flank_slope * self.cell_size * max(self.flank_width, self.back_flank_width)
        if self.kind in ("ridge", "ring") and top > self.amplitude:
            raise TerrainError("flank rises above the crest; reduce flank_slope or flank_width")


def _smooth_noise(rng, shape, sigma) -> np.ndarray:
    noise = gaussian_filter(rng.standard_normal(shape), sigma=sigma, mode="reflect")
    lo, hi = noise.min(), noise.max()
    if hi - lo == 0:
        return np.zeros(shape)
    return (noise - lo) / (hi - lo)


def _band_profile(s: TerrainSpec, d: np.ndarray, start: float) -> np.ndarray:
    """Height as a function of distance ``d`` (cells) for ridge/ring profiles.

    The crest occupies ``[start, start + crest_width)``; the front flank sits
    just below ``start`` and the back flank just past the crest.
    """
    step = s.flank_slope * s.cell_size
    z = np.zeros_like(d, dtype=np.float64)
    crest_end = start + s.crest_width
    crest = (d >= start) & (d < crest_end)
    z[crest] = s.amplitude
    if s.flank_width:
        front = (d >= start - s.flank_width) & (d < start)
        z[front] = step * (d[front] - (start - s.flank_width) + 1)
    if s.back_flank_width:
        back = (d >= crest_end) & (d < crest_end + s.back_flank_width)
        z[back] = step * (crest_end + s.back_flank_width - d[back])
    return z


def synthesize_terrain(spec: TerrainSpec) -> TerrainGrid:
    """Build a deterministic synthetic DEM from ``spec``."""
    shape = (spec.nrows, spec.ncols)
    rng = np.random.default_rng(spec.seed)
    cols = np.arange(spec.ncols, dtype=np.float64)
    if spec.kind == "flat":
        z = np.zeros(shape)
    elif spec.kind == "ramp":
        z = np.broadcast_to(spec.amplitude * cols / (spec.ncols - 1), shape).copy()
    elif spec.kind == "ridge":
        start = spec.ncols // 2 if spec.ridge_col is None else spec.ridge_col
        z = np.broadcast_to(_band_profile(spec, cols, start), shape).copy()
    elif spec.kind == "ring":
        cc, cr = spec.center if spec.center is not None else (spec.ncols // 2, spec.nrows // 2)
        rr, ccs = np.mgrid[0 : spec.nrows, 0 : spec.ncols]
        dist = np.hypot(ccs - cc, rr - cr)
        # radial distance decreases towards the centre, so mirror the profile
        outer = spec.inner_radius + spec.crest_width
        z = _band_profile(spec, outer - dist + spec.inner_radius, spec.inner_radius)
    else:
        z = spec.amplitude * _smooth_noise(rng, shape, spec.sigma)
    if spec.roughness:
        overlay_rng = np.random.default_rng([spec.seed, 1])
        z = z + spec.roughness * _smooth_noise(overlay_rng, shape, spec.sigma)
    return TerrainGrid(spec.ncols, spec.nrows, float(spec.cell_size), 0.0, 0.0, z + spec.base)
