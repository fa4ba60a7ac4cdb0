"""Independent 1D reference: piecewise-cylindrical horn via chain matrices.

Each segment of length l and area A maps mouth-side (pressure, volume
velocity) to glottis-side through

    [[cos kl,        j Zc sin kl],
     [j sin kl / Zc, cos kl     ]],   Zc = rho c / A,

lossless and planar. With an ideal open mouth (p = 0) the volume-velocity
transfer from glottis to mouth is 1/M22 of the full chain product, whose
poles are the tube resonances. This shares no code with the 2.5D solver,
which is the point: it anchors the formant comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import DB_FLOOR, FormantSet, TransferFunction, find_formants
from .errors import ValidationError
from .geometry import AreaFunction


@dataclass
class SegmentChain:
    """Concatenated cylinder segments, glottis first."""

    lengths: np.ndarray
    areas: np.ndarray
    c: float = 350.0
    rho: float = 1.14

    def __post_init__(self):
        lengths = np.asarray(self.lengths, dtype=np.float64)
        areas = np.asarray(self.areas, dtype=np.float64)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "areas", areas)
        if lengths.ndim != 1 or lengths.size == 0 or lengths.shape != areas.shape:
            raise ValidationError("lengths and areas must be equal-length non-empty 1D arrays")
        if np.any(lengths <= 0) or np.any(areas <= 0):
            raise ValidationError("segment lengths and areas must be positive")
        if not (self.c > 0 and self.rho > 0):
            raise ValidationError("c and rho must be positive")

    @property
    def total_length(self) -> float:
        return float(self.lengths.sum())


def chain_from_area_function(af: AreaFunction, segment_length: float,
                             c: float = 350.0, rho: float = 1.14) -> SegmentChain:
    """Slice an area function into equal segments, each taking the area at
    its midpoint. The count is the nearest integer to length/segment_length
    (at least 1), so the requested segment length is only approximate."""
    total = af.length
    if not (segment_length > 0):
        raise ValidationError("segment_length must be > 0")
    if segment_length > total:
        raise ValidationError(
            f"segment_length {segment_length} exceeds the tube length {total}")
    n = max(1, int(round(total / segment_length)))
    seg = total / n
    mids = (np.arange(n) + 0.5) * seg
    areas = np.array([af.area_at(s) for s in mids])
    return SegmentChain(lengths=np.full(n, seg), areas=areas, c=c, rho=rho)


def chain_matrix(length: float, area: float, freq: float, c: float, rho: float) -> np.ndarray:
    """2x2 transmission matrix of one lossless cylinder at one frequency."""
    k = 2.0 * np.pi * freq / c
    zc = rho * c / area
    kl = k * length
    return np.array([[np.cos(kl), 1j * zc * np.sin(kl)],
                     [1j * np.sin(kl) / zc, np.cos(kl)]])


def _chain_m22(chain: SegmentChain, freqs: np.ndarray) -> np.ndarray:
    """M22 of the full chain product, vectorized over frequency."""
    k = 2.0 * np.pi * np.asarray(freqs, dtype=np.float64) / chain.c
    m11 = np.ones(k.shape, dtype=np.complex128)
    m12 = np.zeros(k.shape, dtype=np.complex128)
    m21 = np.zeros(k.shape, dtype=np.complex128)
    m22 = np.ones(k.shape, dtype=np.complex128)
    for length, area in zip(chain.lengths, chain.areas):
        zc = chain.rho * chain.c / area
        kl = k * length
        a = np.cos(kl)
        b = 1j * zc * np.sin(kl)
        c_ = 1j * np.sin(kl) / zc
        n11 = m11 * a + m12 * c_
        n12 = m11 * b + m12 * a
        n21 = m21 * a + m22 * c_
        n22 = m21 * b + m22 * a
        m11, m12, m21, m22 = n11, n12, n21, n22
    return m22


def input_output_response(chain: SegmentChain, freqs) -> np.ndarray:
    """|U_mouth / U_glottis| with an ideal open (zero-pressure) mouth: the
    reciprocal magnitude of the chain's M22 entry. Resonances are its poles."""
    freqs = np.atleast_1d(np.asarray(freqs, dtype=np.float64))
    if np.any(freqs < 0):
        raise ValidationError("frequencies must be non-negative")
    m22 = _chain_m22(chain, freqs)
    return 1.0 / np.maximum(np.abs(m22), 1e-30)


def response_spectrum(chain: SegmentChain, f_max: float = 10000.0,
                      df: float = 1.0) -> TransferFunction:
    """The oracle's magnitude curve on a uniform grid [0, f_max]."""
    if not (0 < df < f_max):
        raise ValidationError("need 0 < df < f_max")
    n = int(round(f_max / df))
    freqs = np.arange(n + 1) * df
    resp = input_output_response(chain, freqs)
    db = 20.0 * np.log10(np.maximum(resp, DB_FLOOR))
    return TransferFunction(freqs=freqs, magnitude_db=db, source_rate=2.0 * f_max,
                            n_samples=None)


def oracle_formants(chain: SegmentChain, count: int, f_max: float = 10000.0,
                    df: float = 1.0, f_min: float = 1.0) -> FormantSet:
    """Resonance frequencies from a sweep of the oracle response."""
    tf = response_spectrum(chain, f_max=f_max, df=df)
    return find_formants(tf, count, f_min=f_min, f_max=f_max)
