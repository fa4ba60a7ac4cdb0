"""2.5D FDTD stepping on the staggered grid.

Pressure sits at cell centers, vx at (x+1/2, y) edges, vy at (x, y+1/2)
edges. Each step advances velocity first (consuming the latest pressure and
the current excitation sample), then pressure. The depth map enters the
pressure update only: edge depths weight the velocity divergence and the
cell depth divides it, so constant depth cancels exactly back to plain 2D.

Boundary handling is branch-free: the blanket sweeps update every edge and
every cell, with the pressure coefficient masked to zero outside air so
wall/outside/excitation/open cells hold p = 0 forever (the open mouth is
thereby a zero-pressure termination). Velocity edges that need prescribed
values (wall admittance, excitation injection, user beta entries) are then
overwritten from precomputed index lists, bucketed by grid row so the fused
whole-run kernels can apply them mid-sweep.

The whole-run kernels store edge depth times velocity (volume flux per unit
width) instead of velocity: the depth weights fold into the velocity-update
coefficients and the pressure stencil needs no extra loads, which keeps the
cost of the depth terms to two coefficient streams. The serial kernels fuse
each step into one front-to-back sweep (velocities of a row, that row's
overwrites, then its pressure); the parallel kernels keep the two-phase
order over row bands. Every write is element-pure and no kernel uses
fastmath or reductions, so fused, two-phase, serial and parallel stepping
are all bitwise identical. The single-step API (Stepper, step_velocity,
step_pressure) keeps plain velocity state.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass

# must be set before numba first loads; harmless otherwise
os.environ.setdefault("NUMBA_THREADING_LAYER_PRIORITY", "omp tbb workqueue")
os.environ.setdefault("NUMBA_NUM_THREADS", str(max(os.cpu_count() or 1, 8)))

import numba
import numpy as np
from numba import njit, prange
from scipy import signal as sps
from scipy.io import wavfile

from .errors import DivergenceError, ValidationError
from .geometry import CellType, SimDomain


@dataclass
class FieldState:
    """Mutable field arrays advanced by the stepping kernels."""

    p: np.ndarray    # (nx, ny)
    vx: np.ndarray   # (nx-1, ny)
    vy: np.ndarray   # (nx, ny-1)
    step_index: int = 0


def new_state(domain: SimDomain) -> FieldState:
    nx, ny = domain.grid.nx, domain.grid.ny
    return FieldState(p=np.zeros((nx, ny)), vx=np.zeros((nx - 1, ny)),
                      vy=np.zeros((nx, ny - 1)))


@dataclass
class BoundaryField:
    """Per-edge blend between the momentum update (beta = 1) and enforcement
    of a prescribed velocity vb (beta = 0). Static geometries use the binary
    endpoints; intermediate values are accepted and reserved. Entries here
    are applied after (and override) the wall/excitation treatment derived
    from cell types."""

    beta_x: np.ndarray
    beta_y: np.ndarray
    vb_x: np.ndarray
    vb_y: np.ndarray

    def __post_init__(self):
        if self.beta_x.shape != self.vb_x.shape or self.beta_y.shape != self.vb_y.shape:
            raise ValidationError("beta and vb shapes must match per axis")
        for b in (self.beta_x, self.beta_y):
            if b.size and (b.min() < 0.0 or b.max() > 1.0):
                raise ValidationError("beta values must lie in [0, 1]")
        for b, v in ((self.beta_x, self.vb_x), (self.beta_y, self.vb_y)):
            if np.any((v != 0.0) & (b != 0.0)):
                raise ValidationError("vb may be nonzero only where beta = 0")

    @classmethod
    def for_domain(cls, domain: SimDomain) -> "BoundaryField":
        nx, ny = domain.grid.nx, domain.grid.ny
        return cls(beta_x=np.ones((nx - 1, ny)), beta_y=np.ones((nx, ny - 1)),
                   vb_x=np.zeros((nx - 1, ny)), vb_y=np.zeros((nx, ny - 1)))


@dataclass
class SimParams:
    dt: float
    duration: float
    diagnostics_interval: int = 1000

    def __post_init__(self):
        if not (self.dt > 0):
            raise ValidationError("dt must be > 0")
        if not (self.duration > 0):
            raise ValidationError("duration must be > 0")
        if self.diagnostics_interval < 1:
            raise ValidationError("diagnostics_interval must be >= 1")

    @property
    def n_steps(self) -> int:
        # tiny guard keeps exact-ratio durations from spilling into an extra step
        return int(math.ceil(self.duration / self.dt - 1e-9))


@dataclass
class ExcitationSignal:
    """Velocity samples (m/s), one per time step, injected at the excitation
    plane. Runs longer than the signal continue with vb = 0 (closed glottis)."""

    samples: np.ndarray
    description: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1:
            raise ValidationError("excitation samples must be a 1D array")
        if samples.size and not np.all(np.isfinite(samples)):
            raise ValidationError("excitation samples must be finite")


@dataclass
class ProbeRecords:
    data: np.ndarray          # (n_probes, n_steps)
    dt: float
    probes: list
    wall_seconds: float
    steps: int
    workers: int = 1

    @property
    def steps_per_second(self) -> float:
        return self.steps / self.wall_seconds if self.wall_seconds > 0 else float("inf")


def max_stable_dt(ds: float, c: float) -> float:
    """Largest stable time step of the 2D scheme, ds / (sqrt(2) c)."""
    if not (ds > 0 and c > 0):
        raise ValidationError("ds and c must be > 0")
    return ds / (math.sqrt(2.0) * c)


def make_pulse(dt: float, length: int = 2048, low_cut: float = 20.0,
               high_cut: float = 20000.0, amplitude: float = 1.0) -> ExcitationSignal:
    """Band-limited velocity pulse: a windowed-sinc band-pass impulse.

    Cutoffs are widened by half the filter transition width so the response
    stays within -3 dB across [low_cut, high_cut]. A low edge that the
    length cannot resolve (low_cut below the transition half-width)
    degenerates to a low-pass, which keeps the band flat but passes DC.
    """
    if length < 8:
        raise ValidationError("pulse length must be >= 8 steps")
    nyq = 0.5 / dt
    if not (0.0 <= low_cut < high_cut < nyq):
        raise ValidationError(
            f"pulse band [{low_cut}, {high_cut}] Hz must satisfy 0 <= low < high < Nyquist {nyq:.0f}")
    fs = 1.0 / dt
    transition = 3.3 * fs / length  # Hamming-window main lobe width in Hz
    f_hi = min(high_cut + 0.5 * transition, 0.5 * (high_cut + nyq))
    f_lo = low_cut - 0.5 * transition
    if f_lo <= 0.0:
        taps = sps.firwin(length, f_hi, window="hamming", fs=fs)
        band = f"low-pass {f_hi:.1f} Hz"
    else:
        taps = sps.firwin(length, [f_lo, f_hi], window="hamming", pass_zero=False, fs=fs)
        band = f"band-pass {f_lo:.1f}-{f_hi:.1f} Hz"
    return ExcitationSignal(samples=amplitude * taps,
                            description=f"windowed-sinc {band}, {length} steps, amp {amplitude}")


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True)
def _vel_core(p, vx, vy, cv, wx, wxg, wy, wyg, sx, sxs, sy, sys_, amp,
              ux, uxb, uxv, uxo, uy, uyb, uyv, uyo, dt):
    nx, ny = p.shape
    for k in range(ux.shape[0]):
        uxo[k] = vx[ux[k, 0], ux[k, 1]]
    for k in range(uy.shape[0]):
        uyo[k] = vy[uy[k, 0], uy[k, 1]]
    for x in range(nx - 1):
        for y in range(ny):
            vx[x, y] -= cv * (p[x + 1, y] - p[x, y])
    for x in range(nx):
        for y in range(ny - 1):
            vy[x, y] -= cv * (p[x, y + 1] - p[x, y])
    for k in range(wx.shape[0]):
        vx[wx[k, 0], wx[k, 1]] = wxg[k] * p[wx[k, 2], wx[k, 3]]
    for k in range(wy.shape[0]):
        vy[wy[k, 0], wy[k, 1]] = wyg[k] * p[wy[k, 2], wy[k, 3]]
    for k in range(sx.shape[0]):
        vx[sx[k, 0], sx[k, 1]] = sxs[k] * amp
    for k in range(sy.shape[0]):
        vy[sy[k, 0], sy[k, 1]] = sys_[k] * amp
    for k in range(ux.shape[0]):
        x, y = ux[k, 0], ux[k, 1]
        b = uxb[k]
        vx[x, y] = (b * uxo[k] - b * b * cv * (p[x + 1, y] - p[x, y])
                    + dt * (1.0 - b) * uxv[k]) / (b + dt * (1.0 - b))
    for k in range(uy.shape[0]):
        x, y = uy[k, 0], uy[k, 1]
        b = uyb[k]
        vy[x, y] = (b * uyo[k] - b * b * cv * (p[x, y + 1] - p[x, y])
                    + dt * (1.0 - b) * uyv[k]) / (b + dt * (1.0 - b))


@njit(cache=True)
def _prs_core(p, vx, vy, cp, dxe, dye):
    nx, ny = p.shape
    for x in range(1, nx - 1):
        for y in range(1, ny - 1):
            p[x, y] -= cp[x, y] * (
                dxe[x, y] * vx[x, y] - dxe[x - 1, y] * vx[x - 1, y]
                + dye[x, y] * vy[x, y] - dye[x, y - 1] * vy[x, y - 1])


@njit(cache=True)
def _prs_core_2d(p, vx, vy, cp):
    nx, ny = p.shape
    for x in range(1, nx - 1):
        for y in range(1, ny - 1):
            p[x, y] -= cp[x, y] * (
                vx[x, y] - vx[x - 1, y] + vy[x, y] - vy[x, y - 1])


@njit(cache=True)
def _finite(p):
    nx, ny = p.shape
    for x in range(nx):
        for y in range(ny):
            if not np.isfinite(p[x, y]):
                return False
    return True


@njit(cache=True)
def _loop_flux(p, wx, wy, cvx, cvy, cp, cv, dt,
               wxe, wxg, wxr, wye, wyg, wyr,
               sxe, sxs, sxr, sye, sys_, syr,
               uxe, uxb, uxv, uxd, uxi, uxo, uxr,
               uye, uyb, uyv, uyd, uyi, uyo, uyr,
               exc, rec, pr, diag):
    """Whole-run serial kernel on flux state, one fused sweep per step.

    Row x of the sweep computes wx[x, :] and wy[x, :], applies that row's
    overwrites, then updates p[x, :]. Every read still sees the value the
    two-phase order would produce (velocities read only pressures of rows
    >= x, which the sweep has not reached; the pressure of row x reads only
    velocities of rows x-1 and x, both final), so the fusion is exact.
    """
    nx, ny = p.shape
    n_steps = exc.shape[0]
    for n in range(n_steps):
        amp = exc[n]
        for x in range(nx):
            if x < nx - 1:
                for k in range(uxr[x], uxr[x + 1]):
                    uxo[k] = wx[x, uxe[k, 1]] * uxi[k]
                for y in range(ny):
                    wx[x, y] -= cvx[x, y] * (p[x + 1, y] - p[x, y])
                for k in range(wxr[x], wxr[x + 1]):
                    wx[x, wxe[k, 1]] = wxg[k] * p[wxe[k, 2], wxe[k, 3]]
                for k in range(sxr[x], sxr[x + 1]):
                    wx[x, sxe[k, 1]] = sxs[k] * amp
                for k in range(uxr[x], uxr[x + 1]):
                    y = uxe[k, 1]
                    b = uxb[k]
                    vn = (b * uxo[k] - b * b * cv * (p[x + 1, y] - p[x, y])
                          + dt * (1.0 - b) * uxv[k]) / (b + dt * (1.0 - b))
                    wx[x, y] = uxd[k] * vn
            for k in range(uyr[x], uyr[x + 1]):
                uyo[k] = wy[x, uye[k, 1]] * uyi[k]
            for y in range(ny - 1):
                wy[x, y] -= cvy[x, y] * (p[x, y + 1] - p[x, y])
            for k in range(wyr[x], wyr[x + 1]):
                wy[x, wye[k, 1]] = wyg[k] * p[wye[k, 2], wye[k, 3]]
            for k in range(syr[x], syr[x + 1]):
                wy[x, sye[k, 1]] = sys_[k] * amp
            for k in range(uyr[x], uyr[x + 1]):
                y = uye[k, 1]
                b = uyb[k]
                vn = (b * uyo[k] - b * b * cv * (p[x, y + 1] - p[x, y])
                      + dt * (1.0 - b) * uyv[k]) / (b + dt * (1.0 - b))
                wy[x, y] = uyd[k] * vn
            if 0 < x < nx - 1:
                for y in range(1, ny - 1):
                    p[x, y] -= cp[x, y] * (wx[x, y] - wx[x - 1, y]
                                           + wy[x, y] - wy[x, y - 1])
        for k in range(pr.shape[0]):
            rec[k, n] = p[pr[k, 0], pr[k, 1]]
        if (n + 1) % diag == 0 and not _finite(p):
            return n
    return -1


@njit(cache=True, parallel=True)
def _loop_flux_par(p, wx, wy, cvx, cvy, cp, cv, dt,
                   wxe, wxg, wye, wyg, sxe, sxs, sye, sys_,
                   uxe, uxb, uxv, uxd, uxi, uxo,
                   uye, uyb, uyv, uyd, uyi, uyo,
                   exc, rec, pr, diag):
    """Whole-run parallel kernel on flux state: two-phase stepping with
    blanket sweeps over row bands and serial overwrites in between. Writes
    are element-pure, so the result is bitwise identical to _loop_flux."""
    nx, ny = p.shape
    n_steps = exc.shape[0]
    for n in range(n_steps):
        amp = exc[n]
        for k in range(uxe.shape[0]):
            uxo[k] = wx[uxe[k, 0], uxe[k, 1]] * uxi[k]
        for k in range(uye.shape[0]):
            uyo[k] = wy[uye[k, 0], uye[k, 1]] * uyi[k]
        for x in prange(nx - 1):
            for y in range(ny):
                wx[x, y] -= cvx[x, y] * (p[x + 1, y] - p[x, y])
        for x in prange(nx):
            for y in range(ny - 1):
                wy[x, y] -= cvy[x, y] * (p[x, y + 1] - p[x, y])
        for k in range(wxe.shape[0]):
            wx[wxe[k, 0], wxe[k, 1]] = wxg[k] * p[wxe[k, 2], wxe[k, 3]]
        for k in range(wye.shape[0]):
            wy[wye[k, 0], wye[k, 1]] = wyg[k] * p[wye[k, 2], wye[k, 3]]
        for k in range(sxe.shape[0]):
            wx[sxe[k, 0], sxe[k, 1]] = sxs[k] * amp
        for k in range(sye.shape[0]):
            wy[sye[k, 0], sye[k, 1]] = sys_[k] * amp
        for k in range(uxe.shape[0]):
            x, y = uxe[k, 0], uxe[k, 1]
            b = uxb[k]
            vn = (b * uxo[k] - b * b * cv * (p[x + 1, y] - p[x, y])
                  + dt * (1.0 - b) * uxv[k]) / (b + dt * (1.0 - b))
            wx[x, y] = uxd[k] * vn
        for k in range(uye.shape[0]):
            x, y = uye[k, 0], uye[k, 1]
            b = uyb[k]
            vn = (b * uyo[k] - b * b * cv * (p[x, y + 1] - p[x, y])
                  + dt * (1.0 - b) * uyv[k]) / (b + dt * (1.0 - b))
            wy[x, y] = uyd[k] * vn
        for x in prange(1, nx - 1):
            for y in range(1, ny - 1):
                p[x, y] -= cp[x, y] * (wx[x, y] - wx[x - 1, y]
                                       + wy[x, y] - wy[x, y - 1])
        for k in range(pr.shape[0]):
            rec[k, n] = p[pr[k, 0], pr[k, 1]]
        if (n + 1) % diag == 0 and not _finite(p):
            return n
    return -1


@njit(cache=True)
def _loop_2d(p, vx, vy, cp, cv, dt,
             wxe, wxg, wxr, wye, wyg, wyr,
             sxe, sxs, sxr, sye, sys_, syr,
             uxe, uxb, uxv, uxo, uxr,
             uye, uyb, uyv, uyo, uyr,
             exc, rec, pr, diag):
    """Whole-run serial kernel of the plain-2D scheme (no depth arithmetic),
    same fused sweep structure as _loop_flux so the pair is a like-for-like
    cost comparison."""
    nx, ny = p.shape
    n_steps = exc.shape[0]
    for n in range(n_steps):
        amp = exc[n]
        for x in range(nx):
            if x < nx - 1:
                for k in range(uxr[x], uxr[x + 1]):
                    uxo[k] = vx[x, uxe[k, 1]]
                for y in range(ny):
                    vx[x, y] -= cv * (p[x + 1, y] - p[x, y])
                for k in range(wxr[x], wxr[x + 1]):
                    vx[x, wxe[k, 1]] = wxg[k] * p[wxe[k, 2], wxe[k, 3]]
                for k in range(sxr[x], sxr[x + 1]):
                    vx[x, sxe[k, 1]] = sxs[k] * amp
                for k in range(uxr[x], uxr[x + 1]):
                    y = uxe[k, 1]
                    b = uxb[k]
                    vx[x, y] = (b * uxo[k] - b * b * cv * (p[x + 1, y] - p[x, y])
                                + dt * (1.0 - b) * uxv[k]) / (b + dt * (1.0 - b))
            for k in range(uyr[x], uyr[x + 1]):
                uyo[k] = vy[x, uye[k, 1]]
            for y in range(ny - 1):
                vy[x, y] -= cv * (p[x, y + 1] - p[x, y])
            for k in range(wyr[x], wyr[x + 1]):
                vy[x, wye[k, 1]] = wyg[k] * p[wye[k, 2], wye[k, 3]]
            for k in range(syr[x], syr[x + 1]):
                vy[x, sye[k, 1]] = sys_[k] * amp
            for k in range(uyr[x], uyr[x + 1]):
                y = uye[k, 1]
                b = uyb[k]
                vy[x, y] = (b * uyo[k] - b * b * cv * (p[x, y + 1] - p[x, y])
                            + dt * (1.0 - b) * uyv[k]) / (b + dt * (1.0 - b))
            if 0 < x < nx - 1:
                for y in range(1, ny - 1):
                    p[x, y] -= cp[x, y] * (vx[x, y] - vx[x - 1, y]
                                           + vy[x, y] - vy[x, y - 1])
        for k in range(pr.shape[0]):
            rec[k, n] = p[pr[k, 0], pr[k, 1]]
        if (n + 1) % diag == 0 and not _finite(p):
            return n
    return -1


# ---------------------------------------------------------------------------
# kernel input assembly

_INT2 = np.zeros((0, 2), dtype=np.int64)
_INT4 = np.zeros((0, 4), dtype=np.int64)
_F0 = np.zeros(0)

WALL_FORMS = ("admittance", "impedance")


@dataclass
class _Kernel:
    cp: np.ndarray        # masked 2.5D pressure coefficient (0 off air)
    cp2d: np.ndarray      # masked plain-2D pressure coefficient
    dxe: np.ndarray       # x-edge depths, (nx-1, ny)
    dye: np.ndarray       # y-edge depths, (nx, ny-1)
    cvx: np.ndarray       # cv * dxe, velocity coefficient of the flux form
    cvy: np.ndarray       # cv * dye
    cv: float
    dt: float
    # wall / source / user-beta overwrite lists, sorted by row with CSR-style
    # row offsets; *g/*s are velocity-valued coefficients, the f variants are
    # pre-scaled by the edge depth for the flux kernels
    wx: np.ndarray
    wxg: np.ndarray
    wxgf: np.ndarray
    wxr: np.ndarray
    wy: np.ndarray
    wyg: np.ndarray
    wygf: np.ndarray
    wyr: np.ndarray
    sx: np.ndarray
    sxs: np.ndarray
    sxsf: np.ndarray
    sxr: np.ndarray
    sy: np.ndarray
    sys_: np.ndarray
    sysf: np.ndarray
    syr: np.ndarray
    ux: np.ndarray
    uxb: np.ndarray
    uxv: np.ndarray
    uxd: np.ndarray
    uxi: np.ndarray
    uxo: np.ndarray
    uxr: np.ndarray
    uy: np.ndarray
    uyb: np.ndarray
    uyv: np.ndarray
    uyd: np.ndarray
    uyi: np.ndarray
    uyo: np.ndarray
    uyr: np.ndarray


def _wall_edges(cells_lo, cells_hi, gain):
    """(edge, pressure-cell, coefficient) lists for air|wall edge pairs along
    one axis; positive velocity points from lo to hi, the prescribed value
    points into the wall."""
    air, wall = int(CellType.AIR), int(CellType.WALL)
    rows = []
    gains = []
    lo_air = (cells_lo == air) & (cells_hi == wall)
    for x, y in zip(*np.nonzero(lo_air)):
        rows.append((x, y, x, y))
        gains.append(gain)
    hi_air = (cells_lo == wall) & (cells_hi == air)
    for x, y in zip(*np.nonzero(hi_air)):
        rows.append((x, y, x + 1, y))
        gains.append(-gain)
    if not rows:
        return _INT4, _F0
    return np.array(rows, dtype=np.int64), np.array(gains)


def _source_edges(cells_lo, cells_hi):
    exc, air = int(CellType.EXCITATION), int(CellType.AIR)
    rows = []
    signs = []
    for x, y in zip(*np.nonzero((cells_lo == exc) & (cells_hi == air))):
        rows.append((x, y))
        signs.append(1.0)
    for x, y in zip(*np.nonzero((cells_lo == air) & (cells_hi == exc))):
        rows.append((x, y))
        signs.append(-1.0)
    if not rows:
        return _INT2, _F0
    return np.array(rows, dtype=np.int64), np.array(signs)


def _row_sorted(idx, coefs, nx):
    """Sort overwrite entries by (row, column) and return row-start offsets
    so kernels can slice a single row's entries."""
    if idx.shape[0]:
        order = np.lexsort((idx[:, 1], idx[:, 0]))
        idx = np.ascontiguousarray(idx[order])
        coefs = [np.ascontiguousarray(np.asarray(c)[order]) for c in coefs]
    rp = np.searchsorted(idx[:, 0], np.arange(nx + 1)).astype(np.int64)
    return idx, coefs, rp


def _edge_depth(depths, idx):
    if idx.shape[0] == 0:
        return _F0
    return np.ascontiguousarray(depths[idx[:, 0], idx[:, 1]])


def _compile(domain: SimDomain, dt: float, boundary: BoundaryField | None,
             wall_form: str) -> _Kernel:
    if wall_form not in WALL_FORMS:
        raise ValidationError(f"wall_form must be one of {WALL_FORMS}, got {wall_form!r}")
    cells = domain.cells
    nx = domain.grid.nx
    ds = domain.grid.ds
    c, rho, mu = domain.constants.c, domain.constants.rho, domain.constants.mu

    air = cells == int(CellType.AIR)
    d_bar = domain.depth.d_bar
    if np.any(d_bar[air] <= 0.0):
        raise ValidationError("air cells with non-positive d_bar; depth map is invalid")
    cp = np.zeros_like(d_bar)
    cp[air] = rho * c * c * dt / (ds * d_bar[air])
    cp2d = np.zeros_like(d_bar)
    cp2d[air] = rho * c * c * dt / ds

    dxe = np.ascontiguousarray(domain.depth.d_x[:-1, :])
    dye = np.ascontiguousarray(domain.depth.d_y[:, :-1])
    cv = dt / (rho * ds)

    gain = mu / (rho * c) if wall_form == "admittance" else mu * rho * c
    wx, wxg = _wall_edges(cells[:-1, :], cells[1:, :], gain)
    wx, (wxg,), wxr = _row_sorted(wx, [wxg], nx)
    wy, wyg = _wall_edges(cells[:, :-1], cells[:, 1:], gain)
    wy, (wyg,), wyr = _row_sorted(wy, [wyg], nx)
    sx, sxs = _source_edges(cells[:-1, :], cells[1:, :])
    sx, (sxs,), sxr = _row_sorted(sx, [sxs], nx)
    sy, sys_ = _source_edges(cells[:, :-1], cells[:, 1:])
    sy, (sys_,), syr = _row_sorted(sy, [sys_], nx)

    if boundary is not None:
        bx = np.nonzero(boundary.beta_x < 1.0)
        ux = np.stack(bx, axis=1).astype(np.int64) if bx[0].size else _INT2
        ux, (uxb, uxv), uxr = _row_sorted(
            ux, [boundary.beta_x[bx].astype(np.float64),
                 boundary.vb_x[bx].astype(np.float64)], nx)
        by = np.nonzero(boundary.beta_y < 1.0)
        uy = np.stack(by, axis=1).astype(np.int64) if by[0].size else _INT2
        uy, (uyb, uyv), uyr = _row_sorted(
            uy, [boundary.beta_y[by].astype(np.float64),
                 boundary.vb_y[by].astype(np.float64)], nx)
    else:
        ux, (uxb, uxv), uxr = _row_sorted(_INT2, [_F0, _F0], nx)
        uy, (uyb, uyv), uyr = _row_sorted(_INT2, [_F0, _F0], nx)

    uxd = _edge_depth(dxe, ux)
    uyd = _edge_depth(dye, uy)
    # zero-depth edges carry no flux; pin them rather than divide by zero
    uxi = np.where(uxd > 0.0, 1.0 / np.where(uxd > 0.0, uxd, 1.0), 0.0)
    uyi = np.where(uyd > 0.0, 1.0 / np.where(uyd > 0.0, uyd, 1.0), 0.0)

    return _Kernel(
        cp=cp, cp2d=cp2d, dxe=dxe, dye=dye,
        cvx=np.ascontiguousarray(cv * dxe), cvy=np.ascontiguousarray(cv * dye),
        cv=cv, dt=dt,
        wx=wx, wxg=wxg, wxgf=_edge_depth(dxe, wx) * wxg, wxr=wxr,
        wy=wy, wyg=wyg, wygf=_edge_depth(dye, wy) * wyg, wyr=wyr,
        sx=sx, sxs=sxs, sxsf=_edge_depth(dxe, sx) * sxs, sxr=sxr,
        sy=sy, sys_=sys_, sysf=_edge_depth(dye, sy) * sys_, syr=syr,
        ux=ux, uxb=uxb, uxv=uxv, uxd=uxd, uxi=uxi, uxo=np.zeros(uxb.size), uxr=uxr,
        uy=uy, uyb=uyb, uyv=uyv, uyd=uyd, uyi=uyi, uyo=np.zeros(uyb.size), uyr=uyr)


def _check_cfl(domain: SimDomain, dt: float) -> None:
    bound = max_stable_dt(domain.grid.ds, domain.constants.c)
    if dt > bound:
        raise ValidationError(
            f"dt {dt:.6e} s violates the stability bound ds/(sqrt(2) c) = {bound:.6e} s")


class Stepper:
    """Single-step driver over a fixed domain/boundary/dt, for callers that
    manage their own loop and field state. run()/run_parallel() are the fast
    path for whole simulations."""

    def __init__(self, domain: SimDomain, dt: float, boundary: BoundaryField | None = None,
                 wall_form: str = "admittance", depth_terms: bool = True):
        _check_cfl(domain, dt)
        self.domain = domain
        self.dt = dt
        self.depth_terms = depth_terms
        self._k = _compile(domain, dt, boundary, wall_form)

    def velocity(self, state: FieldState, excitation_value: float = 0.0) -> FieldState:
        k = self._k
        _vel_core(state.p, state.vx, state.vy, k.cv, k.wx, k.wxg, k.wy, k.wyg,
                  k.sx, k.sxs, k.sy, k.sys_, float(excitation_value),
                  k.ux, k.uxb, k.uxv, k.uxo, k.uy, k.uyb, k.uyv, k.uyo, k.dt)
        return state

    def pressure(self, state: FieldState) -> FieldState:
        k = self._k
        if self.depth_terms:
            _prs_core(state.p, state.vx, state.vy, k.cp, k.dxe, k.dye)
        else:
            _prs_core_2d(state.p, state.vx, state.vy, k.cp2d)
        state.step_index += 1
        return state


def step_velocity(state: FieldState, domain: SimDomain, dt: float,
                  boundary: BoundaryField | None = None, excitation_value: float = 0.0,
                  wall_form: str = "admittance") -> FieldState:
    """One velocity half-update: momentum where beta = 1, prescribed values
    (wall admittance, excitation, user vb) where beta = 0."""
    return Stepper(domain, dt, boundary, wall_form).velocity(state, excitation_value)


def step_pressure(state: FieldState, domain: SimDomain, dt: float) -> FieldState:
    """One pressure half-update from the freshly updated velocities."""
    return Stepper(domain, dt).pressure(state)


def _prepare_run(domain, params, excitation, probes):
    _check_cfl(domain, params.dt)
    n_steps = params.n_steps
    exc = np.zeros(n_steps)
    m = min(excitation.samples.size, n_steps)
    exc[:m] = excitation.samples[:m]
    if len(probes) == 0:
        raise ValidationError("at least one probe is required")
    pr = np.array([(int(x), int(y)) for x, y in probes], dtype=np.int64)
    for x, y in pr:
        if not (0 <= x < domain.grid.nx and 0 <= y < domain.grid.ny):
            raise ValidationError(f"probe ({x}, {y}) outside the grid")
        if domain.cells[x, y] != int(CellType.AIR):
            raise ValidationError(f"probe ({x}, {y}) is not on an air cell")
    rec = np.empty((pr.shape[0], n_steps))
    return exc, pr, rec


def _run_impl(domain, params, excitation, probes, boundary, wall_form,
              parallel: bool, workers: int, depth_terms: bool) -> ProbeRecords:
    exc, pr, rec = _prepare_run(domain, params, excitation, probes)
    k = _compile(domain, params.dt, boundary, wall_form)
    state = new_state(domain)
    diag = params.diagnostics_interval
    if parallel:
        numba.set_num_threads(workers)
    t0 = time.perf_counter()
    if not depth_terms:
        bad = _loop_2d(state.p, state.vx, state.vy, k.cp2d, k.cv, k.dt,
                       k.wx, k.wxg, k.wxr, k.wy, k.wyg, k.wyr,
                       k.sx, k.sxs, k.sxr, k.sy, k.sys_, k.syr,
                       k.ux, k.uxb, k.uxv, k.uxo, k.uxr,
                       k.uy, k.uyb, k.uyv, k.uyo, k.uyr,
                       exc, rec, pr, diag)
    elif parallel:
        bad = _loop_flux_par(state.p, state.vx, state.vy, k.cvx, k.cvy, k.cp,
                             k.cv, k.dt, k.wx, k.wxgf, k.wy, k.wygf,
                             k.sx, k.sxsf, k.sy, k.sysf,
                             k.ux, k.uxb, k.uxv, k.uxd, k.uxi, k.uxo,
                             k.uy, k.uyb, k.uyv, k.uyd, k.uyi, k.uyo,
                             exc, rec, pr, diag)
    else:
        bad = _loop_flux(state.p, state.vx, state.vy, k.cvx, k.cvy, k.cp,
                         k.cv, k.dt, k.wx, k.wxgf, k.wxr, k.wy, k.wygf, k.wyr,
                         k.sx, k.sxsf, k.sxr, k.sy, k.sysf, k.syr,
                         k.ux, k.uxb, k.uxv, k.uxd, k.uxi, k.uxo, k.uxr,
                         k.uy, k.uyb, k.uyv, k.uyd, k.uyi, k.uyo, k.uyr,
                         exc, rec, pr, diag)
    wall = time.perf_counter() - t0
    if bad >= 0:
        raise DivergenceError(int(bad))
    return ProbeRecords(data=rec, dt=params.dt, probes=list(probes),
                        wall_seconds=wall, steps=exc.size, workers=workers)


def run(domain: SimDomain, params: SimParams, excitation: ExcitationSignal,
        probes, boundary: BoundaryField | None = None,
        wall_form: str = "admittance") -> ProbeRecords:
    """Serial leapfrog loop: per step, velocity update with the current
    excitation sample, pressure update, probe record."""
    return _run_impl(domain, params, excitation, probes, boundary, wall_form,
                     parallel=False, workers=1, depth_terms=True)


def run_parallel(domain: SimDomain, params: SimParams, excitation: ExcitationSignal,
                 probes, workers: int, boundary: BoundaryField | None = None,
                 wall_form: str = "admittance") -> ProbeRecords:
    """Multithreaded stepping over disjoint row bands, bitwise identical to
    run() for the same inputs."""
    if not isinstance(workers, (int, np.integer)) or workers < 1:
        raise ValidationError(f"workers must be a positive integer, got {workers!r}")
    available = numba.config.NUMBA_NUM_THREADS
    effective = min(int(workers), available)
    return _run_impl(domain, params, excitation, probes, boundary, wall_form,
                     parallel=True, workers=effective, depth_terms=True)


def run_2d_reference(domain: SimDomain, params: SimParams, excitation: ExcitationSignal,
                     probes, boundary: BoundaryField | None = None,
                     wall_form: str = "admittance") -> ProbeRecords:
    """Plain-2D serial stepping (all depth arithmetic compiled out), used as
    the equivalence reference on constant-depth domains and as the benchmark
    baseline."""
    return _run_impl(domain, params, excitation, probes, boundary, wall_form,
                     parallel=False, workers=1, depth_terms=False)


def field_energy(domain: SimDomain, state: FieldState, p_prev: np.ndarray | None = None) -> float:
    """Discrete energy of the field in joules.

    With p_prev the pressure from one step earlier, this is the quadratic
    invariant the leapfrog scheme conserves exactly in a lossless closed
    domain; the same-time form (p_prev omitted) oscillates with the sampling
    phase and is only second-order close to it.
    """
    if p_prev is None:
        p_prev = state.p
    ds = domain.grid.ds
    c, rho = domain.constants.c, domain.constants.rho
    dm = domain.depth
    pot = np.sum(dm.d_bar * p_prev * state.p) / (2.0 * rho * c * c)
    kin = 0.5 * rho * (np.sum(dm.d_x[:-1, :] * state.vx * state.vx)
                       + np.sum(dm.d_y[:, :-1] * state.vy * state.vy))
    return float((pot + kin) * ds * ds)


def write_records_csv(records: ProbeRecords, path) -> None:
    """CSV export: `step,time_s,probe0,...` with full float64 round-trip
    precision on the samples."""
    with open(path, "w", newline="") as fh:
        names = ",".join(f"probe{i}" for i in range(records.data.shape[0]))
        fh.write(f"step,time_s,{names}\n")
        for n in range(records.steps):
            vals = ",".join(f"{records.data[i, n]:.17e}" for i in range(records.data.shape[0]))
            fh.write(f"{n},{n * records.dt:.9e},{vals}\n")


def write_records_wav(records: ProbeRecords, path, rate: int | None = None) -> None:
    """32-bit float WAV at the simulation rate (header rate rounded to an
    integer), one channel per probe."""
    if rate is None:
        rate = int(round(1.0 / records.dt))
    data = records.data.T.astype(np.float32)
    if data.shape[1] == 1:
        data = data[:, 0]
    wavfile.write(path, rate, data)
