"""Shared fixtures: small domains for unit tests, the standard vocal-tract
grid for the end-to-end criteria, and an independently computed expected
depth map for the hand-checkable 12x8 tube."""

import math

import numpy as np
import pytest

import depthwave as dw
from depthwave.geometry import CellType, DepthMap, GridSpec, SimDomain

DS = 0.74e-3
TRACT_GRID = GridSpec(nx=270, ny=45, ds=DS)
CONSTANTS = dw.PhysicalConstants(c=350.0, rho=1.14, mu=0.005)
DT = DS / (math.sqrt(2.0) * 350.0)


@pytest.fixture(scope="session")
def tract_uniform():
    """Uniform 0.175 m closed-open tube on the standard 270x45 grid."""
    af = dw.load_fixture("uniform")
    return dw.assemble_domain(af, TRACT_GRID, constants=CONSTANTS)


@pytest.fixture(scope="session")
def short_pulse():
    return dw.make_pulse(DT)


def make_box(nx=64, ny=64, ds=DS, depth=1.0, mu=0.005, excitation_rows=None):
    """All-air box with a wall ring, constant depth everywhere. Optionally a
    1-column excitation strip just inside the left wall."""
    cells = np.full((nx, ny), int(CellType.AIR), dtype=np.uint8)
    cells[0, :] = cells[-1, :] = int(CellType.WALL)
    cells[:, 0] = cells[:, -1] = int(CellType.WALL)
    if excitation_rows is not None:
        cells[1, excitation_rows] = int(CellType.EXCITATION)
    ones = np.full((nx, ny), float(depth))
    dm = DepthMap(d_bar=ones.copy(), d_x=ones.copy(), d_y=ones.copy(),
                  min_depth=float(depth), open_space_depth=float(depth))
    return SimDomain(grid=GridSpec(nx=nx, ny=ny, ds=ds), cells=cells, depth=dm,
                     constants=dw.PhysicalConstants(c=350.0, rho=1.14, mu=mu))


# ---------------------------------------------------------------------------
# hand-computable 12x8 tube: ds = 1 mm, uniform r = 2.2 mm, L = 8 mm.
# The radius clears every lattice offset by at least 0.2 mm, so the raster
# and every chord are unambiguous. All expected values below come from the
# chord formula 2 sqrt(r^2 - t^2) and the documented averaging rules alone.

R12 = 2.2e-3
DS12 = 1.0e-3
L12 = 8.0e-3


def depth12x8_area_function():
    return dw.AreaFunction(np.array([0.0, L12]),
                           np.full(2, math.pi * R12 * R12), name="hand12x8")


def depth12x8_expected():
    """(cells, d_x, d_y, d_bar, default_min_depth) built without the package's
    geometry pipeline."""
    nx, ny = 12, 8
    chord = lambda t: 2.0 * math.sqrt(max(R12 * R12 - t * t, 0.0))
    off = lambda y: (y - 3.5) * DS12

    cells = np.full((nx, ny), int(CellType.OUTSIDE), dtype=np.uint8)
    cells[0:10, 1:7] = int(CellType.WALL)
    for x in range(1, 9):
        for y in range(2, 6):
            cells[x, y] = int(CellType.AIR)
    cells[1, 2:6] = int(CellType.EXCITATION)
    cells[8, 2:6] = int(CellType.OPEN)

    raw_dx = np.zeros((nx, ny))
    raw_dy = np.zeros((nx, ny))
    for x in range(1, 9):
        for y in range(2, 6):
            raw_dx[x, y] = chord(off(y))
            raw_dy[x, y] = chord(off(y) + 0.5 * DS12)

    outside = cells == int(CellType.OUTSIDE)
    d_x = raw_dx.copy()
    d_y = raw_dy.copy()
    d_x[outside] = 0.05
    d_y[outside] = 0.05
    cavity = (cells != int(CellType.OUTSIDE)) & (cells != int(CellType.WALL))
    for x in range(nx - 1):
        for y in range(ny):
            if cavity[x, y]:
                d_x[x, y] = 0.5 * (raw_dx[x, y] + raw_dx[x + 1, y])
    for x in range(nx):
        for y in range(ny - 1):
            if cavity[x, y]:
                d_y[x, y] = 0.5 * (raw_dy[x, y] + raw_dy[x, y + 1])

    d_bar = np.zeros((nx, ny))
    d_bar[outside] = 0.05
    for x in range(1, nx):
        for y in range(1, ny):
            if cavity[x, y]:
                d_bar[x, y] = 0.25 * (d_x[x, y] + d_x[x - 1, y]
                                      + d_y[x, y] + d_y[x, y - 1])

    min_depth = chord(2.0e-3) / 100.0  # smallest raw chord is the rim d_y
    return cells, d_x, d_y, d_bar, min_depth


def depth12x8_domain(min_depth=None):
    af = depth12x8_area_function()
    grid = GridSpec(nx=12, ny=8, ds=DS12)
    cells = dw.build_contour(af, grid)
    dm = dw.build_depth_map(af, cells, grid, min_depth=min_depth)
    return cells, dm
