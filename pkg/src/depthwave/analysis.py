"""Impulse responses to transfer functions to formants.

The magnitude spectrum is taken straight from the zero-padded FFT of the
recorded response, no window. Peak picking has to cope with records that
have not fully decayed by the end of the run (lossless tube fixtures ring
forever): truncating such a record turns each resonance line into a sinc
with deep nulls, and every sidelobe of that comb is a hugely "prominent"
local maximum. Since the comb scale is known exactly (the record's own line
width, rate/n_samples), find_formants smooths the linear magnitude at twice
that width before looking for peaks. Spectra that do not come from a finite
record (the horn oracle's swept curves) pass through unsmoothed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .errors import ValidationError

DB_FLOOR = 1e-15  # magnitudes clipped here before log, -300 dB


@dataclass
class TransferFunction:
    """One-sided magnitude spectrum in dB on a uniform frequency grid from 0
    to Nyquist. n_samples is the length of the originating time record, if
    any; it sets the truncation-ripple scale for peak picking."""

    freqs: np.ndarray
    magnitude_db: np.ndarray
    source_rate: float
    n_samples: int | None = None

    def __post_init__(self):
        if self.freqs.shape != self.magnitude_db.shape:
            raise ValidationError("freqs and magnitude_db must have equal shape")
        if self.freqs.size < 2:
            raise ValidationError("transfer function needs at least 2 frequency samples")

    @property
    def resolution(self) -> float:
        return float(self.freqs[1] - self.freqs[0])


@dataclass
class FormantSet:
    """Ascending resonance-peak frequencies plus their curve heights.
    shortfall is set when fewer peaks than requested were found."""

    frequencies: np.ndarray
    magnitudes_db: np.ndarray
    requested: int
    shortfall: bool = False

    def __post_init__(self):
        if self.frequencies.size != self.magnitudes_db.size:
            raise ValidationError("frequencies and magnitudes must have equal length")
        if self.frequencies.size > 1 and np.any(np.diff(self.frequencies) <= 0):
            raise ValidationError("formant frequencies must be strictly ascending")

    def __len__(self) -> int:
        return int(self.frequencies.size)


def transfer_function(record: np.ndarray, rate: float, pad_to: int = 2 ** 21,
                      reference: np.ndarray | None = None) -> TransferFunction:
    """Magnitude spectrum of a probe record, zero-padded to pad_to points.

    reference, if given, is a source record to deconvolve: the output is the
    ratio of the two magnitude spectra (floored to avoid division blowups).
    """
    record = np.asarray(record, dtype=np.float64)
    if record.ndim != 1 or record.size == 0:
        raise ValidationError("record must be a non-empty 1D array")
    if not (rate > 0):
        raise ValidationError("rate must be > 0")
    if pad_to < record.size:
        raise ValidationError(f"pad_to {pad_to} is shorter than the record ({record.size})")
    if pad_to & (pad_to - 1):
        raise ValidationError(f"pad_to must be a power of two, got {pad_to}")
    mag = np.abs(np.fft.rfft(record, pad_to))
    if reference is not None:
        reference = np.asarray(reference, dtype=np.float64)
        if reference.ndim != 1 or reference.size == 0:
            raise ValidationError("reference must be a non-empty 1D array")
        if pad_to < reference.size:
            raise ValidationError("pad_to is shorter than the reference record")
        ref = np.abs(np.fft.rfft(reference, pad_to))
        mag = mag / np.maximum(ref, ref.max() * 1e-12)
    db = 20.0 * np.log10(np.maximum(mag, DB_FLOOR))
    freqs = np.fft.rfftfreq(pad_to, 1.0 / rate)
    return TransferFunction(freqs=freqs, magnitude_db=db, source_rate=float(rate),
                            n_samples=record.size)


def _peak_curve(tf: TransferFunction) -> np.ndarray:
    """The dB curve peaks are picked on: the raw spectrum, smoothed at twice
    the record's line width when the curve derives from a finite record."""
    if tf.n_samples is None:
        return tf.magnitude_db
    ripple_hz = tf.source_rate / tf.n_samples
    width = int(round(2.0 * ripple_hz / tf.resolution))
    if width <= 1:
        return tf.magnitude_db
    width |= 1  # symmetric kernel
    lin = 10.0 ** (tf.magnitude_db / 20.0)
    kernel = np.full(width, 1.0 / width)
    sm = np.convolve(lin, kernel, mode="same")
    return 20.0 * np.log10(np.maximum(sm, DB_FLOOR))


def find_formants(tf: TransferFunction, count: int, f_min: float, f_max: float,
                  prominence_db: float = 3.0) -> FormantSet:
    """The count lowest-frequency local maxima of the magnitude curve within
    [f_min, f_max] whose prominence reaches prominence_db, each refined by
    3-point parabolic interpolation. Fewer found -> shortfall flag."""
    if count < 1:
        raise ValidationError("count must be >= 1")
    nyquist = tf.freqs[-1]
    if not (0.0 <= f_min < f_max <= nyquist + 1e-9):
        raise ValidationError(
            f"band [{f_min}, {f_max}] must satisfy 0 <= f_min < f_max <= Nyquist {nyquist:.1f}")
    curve = _peak_curve(tf)
    lo = int(np.searchsorted(tf.freqs, f_min, side="left"))
    hi = int(np.searchsorted(tf.freqs, f_max, side="right"))
    if hi - lo < 3:
        raise ValidationError("band contains fewer than 3 spectrum samples")
    seg = curve[lo:hi]
    peaks, _ = find_peaks(seg, prominence=prominence_db)
    peaks = peaks[:count] + lo
    freqs = np.empty(peaks.size)
    mags = np.empty(peaks.size)
    df = tf.resolution
    for i, pk in enumerate(peaks):
        left, center, right = curve[pk - 1], curve[pk], curve[pk + 1]
        denom = left + right - 2.0 * center
        delta = 0.0 if denom == 0.0 else 0.5 * (left - right) / denom
        delta = min(0.5, max(-0.5, delta))
        freqs[i] = tf.freqs[pk] + delta * df
        mags[i] = center - 0.25 * (left - right) * delta
    return FormantSet(frequencies=freqs, magnitudes_db=mags, requested=count,
                      shortfall=peaks.size < count)


@dataclass
class FormantComparison:
    measured: FormantSet
    reference: FormantSet
    delta_hz: np.ndarray = field(init=False)
    delta_pct: np.ndarray = field(init=False)

    def __post_init__(self):
        if len(self.measured) != len(self.reference):
            raise ValidationError(
                f"formant counts differ: {len(self.measured)} vs {len(self.reference)}")
        if len(self.measured) == 0:
            raise ValidationError("nothing to compare: empty formant sets")
        m = self.measured.frequencies
        r = self.reference.frequencies
        self.delta_hz = m - r
        self.delta_pct = 100.0 * (m - r) / r

    def to_text(self) -> str:
        """Aligned table, one formant per row: measured, reference, signed
        absolute and relative differences."""
        lines = [f"{'':>4} {'measured':>12} {'reference':>12} {'diff':>10} {'diff %':>9}"]
        for i in range(len(self.measured)):
            lines.append(
                f"F{i + 1:<3} {self.measured.frequencies[i]:>10.1f} Hz"
                f" {self.reference.frequencies[i]:>10.1f} Hz"
                f" {self.delta_hz[i]:>+7.0f} Hz {self.delta_pct[i]:>+8.2f} %")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "measured_hz": self.measured.frequencies.tolist(),
            "reference_hz": self.reference.frequencies.tolist(),
            "delta_hz": self.delta_hz.tolist(),
            "delta_pct": self.delta_pct.tolist(),
            "max_abs_pct": float(np.max(np.abs(self.delta_pct))),
        }


def compare_formants(measured: FormantSet, reference: FormantSet) -> FormantComparison:
    return FormantComparison(measured=measured, reference=reference)


def write_transfer_function_csv(tf: TransferFunction, path, f_max: float | None = None) -> None:
    """CSV export `freq_hz,magnitude_db`, optionally truncated to f_max to
    keep files reviewable."""
    hi = tf.freqs.size if f_max is None else int(np.searchsorted(tf.freqs, f_max, side="right"))
    with open(path, "w", newline="") as fh:
        fh.write("freq_hz,magnitude_db\n")
        for i in range(hi):
            fh.write(f"{tf.freqs[i]:.9e},{tf.magnitude_db[i]:.9e}\n")


def write_formants_json(formants: FormantSet, path, extra: dict | None = None) -> None:
    payload = {
        "frequencies_hz": formants.frequencies.tolist(),
        "magnitudes_db": formants.magnitudes_db.tolist(),
        "requested": formants.requested,
        "shortfall": formants.shortfall,
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
