"""Tube geometry: area functions, mid-sagittal contours, and depth maps.

A straight circular tube is fully described by its area function A(s),
the cross-sectional area against the axial distance s from the glottal
plane. This module rasterizes the tube onto a square grid (cell types),
then samples the tube depth (chord length along the symmetry axis z) at
the staggered positions used by the solver: cell centers (d_bar) and
the right/top cell edges (d_x, d_y). Depth extraction runs in the order
wall zeros, outside constant, raw chords, forward-neighbor averaging of
the edge values, 4-averaging into d_bar, and minimum-depth clamping.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np
from scipy import ndimage

from .errors import ValidationError

# Constriction correction for circular sections: multiplying every section
# radius by 0.5*pi/1.84 aligns the first non-planar mode of the symmetric
# 2D section with the circular one. Applied to the solver path only; the
# 1D horn oracle consumes unscaled areas.
RADIUS_SCALE = 0.5 * math.pi / 1.84

DEFAULT_OPEN_SPACE_DEPTH = 0.05  # m, assigned outside the walls


class CellType(IntEnum):
    AIR = 0
    WALL = 1
    EXCITATION = 2
    OPEN = 3
    OUTSIDE = 4


@dataclass(frozen=True)
class AreaFunction:
    """Ordered axial samples (position in m, area in m^2) of a straight tube."""

    positions: np.ndarray
    areas: np.ndarray
    name: str = "tube"

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=np.float64)
        areas = np.asarray(self.areas, dtype=np.float64)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "areas", areas)
        if positions.ndim != 1 or areas.ndim != 1 or positions.size != areas.size:
            raise ValidationError("positions and areas must be 1D arrays of equal length")
        if positions.size < 2:
            raise ValidationError("area function needs at least 2 samples")
        if positions[0] != 0.0:
            raise ValidationError("axial positions must start at 0")
        if not np.all(np.diff(positions) > 0):
            raise ValidationError("axial positions must be strictly increasing")
        if not np.all(areas > 0):
            raise ValidationError("every area must be > 0")
        if not (np.all(np.isfinite(positions)) and np.all(np.isfinite(areas))):
            raise ValidationError("area function samples must be finite")

    @property
    def length(self) -> float:
        return float(self.positions[-1])

    @property
    def radii(self) -> np.ndarray:
        return np.sqrt(self.areas / math.pi)

    def radius_at(self, s):
        """Section radius at axial position(s) s, linear in radius between
        samples, clamped to the end samples outside the tube."""
        return np.interp(s, self.positions, self.radii)

    def area_at(self, s):
        r = self.radius_at(s)
        return math.pi * r * r


@dataclass(frozen=True)
class GridSpec:
    """Square-cell grid: ds is the cell edge, origin the world coordinate of
    the center of cell (0, 0)."""

    ds: float
    nx: int
    ny: int
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not (self.ds > 0):
            raise ValidationError("ds must be > 0")
        if self.nx < 3 or self.ny < 3:
            raise ValidationError("nx and ny must be >= 3")

    @property
    def axis_row(self) -> float:
        # vertical grid midline in row units; integer for odd ny
        return (self.ny - 1) / 2.0


@dataclass(frozen=True)
class DepthMap:
    """Depth in meters at cell centers (d_bar) and at the (x+1/2, y) and
    (x, y+1/2) edges (d_x, d_y), all stored on the full cell grid."""

    d_bar: np.ndarray
    d_x: np.ndarray
    d_y: np.ndarray
    min_depth: float
    open_space_depth: float

    def __post_init__(self):
        if not (self.d_bar.shape == self.d_x.shape == self.d_y.shape):
            raise ValidationError("depth grids must share one shape")


@dataclass(frozen=True)
class PhysicalConstants:
    c: float = 350.0  # m/s
    rho: float = 1.14  # kg/m^3
    mu: float = 0.005  # wall admittance, dimensionless

    def __post_init__(self):
        if not (self.c > 0 and self.rho > 0):
            raise ValidationError("c and rho must be > 0")
        if not (0.0 <= self.mu <= 1.0):
            raise ValidationError("mu must lie in [0, 1]")


@dataclass(frozen=True)
class SimDomain:
    """Immutable problem definition: grid, cell types, depth map, constants."""

    grid: GridSpec
    cells: np.ndarray
    depth: DepthMap
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    def __post_init__(self):
        shape = (self.grid.nx, self.grid.ny)
        if self.cells.shape != shape:
            raise ValidationError(f"cells raster shape {self.cells.shape} != grid {shape}")
        if self.depth.d_bar.shape != shape:
            raise ValidationError(f"depth shape {self.depth.d_bar.shape} != grid {shape}")


def parse_area_function(text: str, name: str = "tube") -> AreaFunction:
    """Parse the two-column plain-text format: axial position (m) and area
    (m^2) per line, '#' comments and blank lines ignored."""
    positions = []
    areas = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ValidationError(f"line {lineno}: expected 2 fields, got {len(fields)}")
        try:
            pos = float(fields[0])
            area = float(fields[1])
        except ValueError:
            raise ValidationError(f"line {lineno}: could not parse numbers from {line!r}") from None
        positions.append(pos)
        areas.append(area)
    if len(positions) < 2:
        raise ValidationError("area function needs at least 2 samples")
    if positions[0] != 0.0:
        raise ValidationError("line 1 of data: axial positions must start at 0")
    for i in range(1, len(positions)):
        if positions[i] <= positions[i - 1]:
            raise ValidationError("positions not strictly increasing "
                                  f"({positions[i]} after {positions[i - 1]})")
    for i, a in enumerate(areas):
        if a <= 0:
            raise ValidationError(f"sample {i}: area must be > 0, got {a}")
    return AreaFunction(np.array(positions), np.array(areas), name=name)


def write_area_function(af: AreaFunction, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# {af.name}: axial position (m), area (m^2)\n")
        for s, a in zip(af.positions, af.areas):
            fh.write(f"{s:.9e} {a:.9e}\n")


def scale_radii(af: AreaFunction) -> AreaFunction:
    """Multiply every section radius by RADIUS_SCALE (areas by its square).
    Positions are passed through untouched. Not idempotent: applying twice
    scales by the fourth power."""
    return replace(af, areas=af.areas * (RADIUS_SCALE * RADIUS_SCALE))


def _tube_columns(af: AreaFunction, ds: float) -> int:
    n_cols = int(round(af.length / ds))
    if n_cols < 1:
        raise ValidationError(f"tube length {af.length} m shorter than one cell (ds={ds})")
    return n_cols


def _row_offsets(grid: GridSpec) -> np.ndarray:
    # signed distance of each row center from the tube axis (the grid midline)
    return (np.arange(grid.ny) - grid.axis_row) * grid.ds


def build_contour(af: AreaFunction, grid: GridSpec) -> np.ndarray:
    """Rasterize the straight tube onto the grid.

    Tube axis runs along x on the grid midline, glottis at low x. Column x
    (1-based) covers axial positions [(x-1) ds, x ds]; a cell is air when its
    center lies strictly inside the local radius. The first tube column is
    the excitation plane, the last the open (mouth) plane, and the 1-cell
    ring of cells 8-adjacent to the cavity becomes wall.
    """
    ds = grid.ds
    n_cols = _tube_columns(af, ds)
    offsets = _row_offsets(grid)

    required_nx = n_cols + 2
    r_max = float(np.max(af.radii))
    # worst-case row count for this grid parity, plus the wall ring
    half_span = int(math.ceil(r_max / ds)) + 2
    virtual = (np.arange(-half_span, half_span + 1) + (grid.axis_row - round(grid.axis_row))) * ds
    required_ny = int(np.count_nonzero(np.abs(virtual) < r_max)) + 2
    if required_nx > grid.nx or required_ny > grid.ny:
        raise ValidationError(
            f"domain too small for tube: need nx >= {required_nx}, ny >= {required_ny} "
            f"(got {grid.nx}, {grid.ny})")

    cells = np.full((grid.nx, grid.ny), CellType.OUTSIDE, dtype=np.uint8)
    for col in range(1, n_cols + 1):
        s = min((col - 0.5) * ds, af.length)
        r = float(af.radius_at(s))
        rows = np.abs(offsets) < r
        if not rows.any():
            raise ValidationError(
                f"tube column {col} has no air cells (radius {r:.3e} m below grid "
                f"resolution); decrease ds")
        cells[col, rows] = CellType.AIR

    cavity = cells == CellType.AIR
    cells[1, cavity[1]] = CellType.EXCITATION
    cells[n_cols, cavity[n_cols]] = CellType.OPEN

    ring = ndimage.binary_dilation(cavity, structure=np.ones((3, 3), dtype=bool)) & ~cavity
    cells[ring] = CellType.WALL
    return cells


def _cavity_mask(cells: np.ndarray) -> np.ndarray:
    return (cells == CellType.AIR) | (cells == CellType.EXCITATION) | (cells == CellType.OPEN)


def raw_edge_depths(af: AreaFunction, grid: GridSpec, cells: np.ndarray):
    """Chord lengths 2 sqrt(r^2 - y^2) at the edge sample points of every
    cavity cell, before any averaging or clamping. Non-cavity cells hold 0."""
    ds = grid.ds
    offsets = _row_offsets(grid)
    raw_dx = np.zeros((grid.nx, grid.ny))
    raw_dy = np.zeros((grid.nx, grid.ny))
    cavity = _cavity_mask(cells)
    length = af.length
    for x in range(grid.nx):
        rows = np.nonzero(cavity[x])[0]
        if rows.size == 0:
            continue
        # d_x samples sit at the right edge (x+1/2), half a cell further along
        r_edge = float(af.radius_at(min(x * ds, length)))
        r_center = float(af.radius_at(min((x - 0.5) * ds, length)))
        y_c = offsets[rows]
        y_e = y_c + 0.5 * ds
        raw_dx[x, rows] = 2.0 * np.sqrt(np.maximum(0.0, r_edge * r_edge - y_c * y_c))
        raw_dy[x, rows] = 2.0 * np.sqrt(np.maximum(0.0, r_center * r_center - y_e * y_e))
    return raw_dx, raw_dy


def build_depth_map(af: AreaFunction, cells: np.ndarray, grid: GridSpec,
                    min_depth: float | None = None,
                    open_space_depth: float = DEFAULT_OPEN_SPACE_DEPTH) -> DepthMap:
    """Run the depth extraction over a rasterized tube.

    min_depth defaults to 1/100 of the smallest nonzero raw chord; passing a
    value at or above that smallest chord is allowed but warns, because the
    clamp then reshapes real geometry instead of only patching degenerate
    edge samples.
    """
    cavity = _cavity_mask(cells)
    outside = cells == CellType.OUTSIDE

    d_x, d_y = raw_edge_depths(af, grid, cells)
    raw_positive = np.concatenate([d_x[cavity], d_y[cavity]])
    raw_positive = raw_positive[raw_positive > 0]
    if raw_positive.size == 0:
        raise ValidationError("no positive raw depths found inside the tube")
    smallest_raw = float(raw_positive.min())

    if min_depth is None:
        min_depth = smallest_raw / 100.0
    if min_depth <= 0:
        raise ValidationError(f"min_depth must be > 0, got {min_depth}")
    if min_depth >= smallest_raw:
        warnings.warn(
            f"min_depth {min_depth:.3e} is not below the smallest raw depth "
            f"{smallest_raw:.3e}; clamping will reshape the tube", stacklevel=2)

    d_x[outside] = open_space_depth
    d_y[outside] = open_space_depth

    # forward-neighbor smoothing of the edge samples; cavity cells always
    # have an in-grid forward neighbor (wall ring), whose value is 0
    avg_x = d_x.copy()
    avg_y = d_y.copy()
    avg_x[:-1, :] = np.where(cavity[:-1, :], 0.5 * (d_x[:-1, :] + d_x[1:, :]), avg_x[:-1, :])
    avg_y[:, :-1] = np.where(cavity[:, :-1], 0.5 * (d_y[:, :-1] + d_y[:, 1:]), avg_y[:, :-1])
    d_x, d_y = avg_x, avg_y

    d_bar = np.zeros_like(d_x)
    d_bar[outside] = open_space_depth
    inner = 0.25 * (d_x + np.roll(d_x, 1, axis=0) + d_y + np.roll(d_y, 1, axis=1))
    d_bar[cavity] = inner[cavity]

    d_x[cavity] = np.maximum(d_x[cavity], min_depth)
    d_y[cavity] = np.maximum(d_y[cavity], min_depth)
    d_bar[cavity] = np.maximum(d_bar[cavity], min_depth)

    return DepthMap(d_bar=d_bar, d_x=d_x, d_y=d_y,
                    min_depth=float(min_depth), open_space_depth=float(open_space_depth))


def assemble_domain(af: AreaFunction, grid: GridSpec,
                    constants: PhysicalConstants = PhysicalConstants(),
                    min_depth: float | None = None,
                    open_space_depth: float = DEFAULT_OPEN_SPACE_DEPTH,
                    apply_radius_scale: bool = True) -> SimDomain:
    """Area function to complete SimDomain. apply_radius_scale rescales the
    section radii for the circular-mode match before rasterization."""
    shaped = scale_radii(af) if apply_radius_scale else af
    cells = build_contour(shaped, grid)
    depth = build_depth_map(shaped, cells, grid, min_depth=min_depth,
                            open_space_depth=open_space_depth)
    domain = SimDomain(grid=grid, cells=cells, depth=depth, constants=constants)
    _check_connectivity(domain)
    return domain


def _check_connectivity(domain: SimDomain) -> None:
    # every cavity cell must reach the excitation plane 4-connectedly
    cavity = _cavity_mask(domain.cells)
    labels, n = ndimage.label(cavity, structure=np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]]))
    if n == 0:
        raise ValidationError("domain has no cavity cells")
    exc_labels = set(np.unique(labels[domain.cells == CellType.EXCITATION])) - {0}
    reachable = np.isin(labels, list(exc_labels))
    if not np.array_equal(reachable, cavity):
        raise ValidationError("cavity contains cells not connected to the excitation plane")


def depth_map_from_mesh(mesh, grid: GridSpec, **kwargs):
    """Depth extraction by ray-mesh intersection of a full 3D model.

    Interface stub: only the analytic circular-section path is implemented
    in this package.
    """
    raise NotImplementedError("3D-mesh depth extraction is not implemented; "
                              "use build_depth_map on an area function")


def export_depth_map_csv(domain: SimDomain, path) -> None:
    """Write `x,y,d_bar,d_x,d_y` rows (SI units, row-major) for golden-file
    diffs and plotting. d_x/d_y are the right/top edge values stored on each
    cell."""
    grid = domain.grid
    dm = domain.depth
    with open(path, "w", newline="") as fh:
        fh.write("x,y,d_bar,d_x,d_y\n")
        for x in range(grid.nx):
            wx = grid.origin[0] + x * grid.ds
            for y in range(grid.ny):
                wy = grid.origin[1] + y * grid.ds
                fh.write(f"{wx:.9e},{wy:.9e},{dm.d_bar[x, y]:.9e},"
                         f"{dm.d_x[x, y]:.9e},{dm.d_y[x, y]:.9e}\n")
