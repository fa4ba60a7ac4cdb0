"""Spectra and formant extraction on synthetic signals with known answers."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import depthwave as dw
from depthwave.analysis import DB_FLOOR, _peak_curve
from depthwave.errors import ValidationError

RATE = 32000.0


def damped_modes(freqs_hz, n, rate, tau=0.01):
    """Sum of decaying cosines: a record whose spectrum has clean peaks."""
    t = np.arange(n) / rate
    out = np.zeros(n)
    for f in freqs_hz:
        out += np.exp(-t / tau) * np.cos(2.0 * math.pi * f * t)
    return out


# --- transfer_function -------------------------------------------------------

def test_delta_has_flat_zero_db_spectrum():
    record = np.zeros(64)
    record[0] = 1.0
    tf = dw.transfer_function(record, RATE, pad_to=4096)
    np.testing.assert_allclose(tf.magnitude_db, 0.0, atol=1e-12)
    assert tf.freqs[0] == 0.0
    assert tf.freqs[-1] == pytest.approx(RATE / 2)
    assert tf.n_samples == 64
    assert tf.source_rate == RATE
    assert tf.resolution == pytest.approx(RATE / 4096)


def test_padding_preserves_energy():
    # zero padding cannot change sum |X|^2 / N (Parseval on the padded grid)
    rng = np.random.default_rng(7)
    record = rng.standard_normal(500)
    tf = dw.transfer_function(record, RATE, pad_to=2048)
    mag = 10.0 ** (tf.magnitude_db / 20.0)
    # rebuild two-sided energy from the one-sided magnitudes
    twosided = np.concatenate([mag, mag[-2:0:-1]])
    assert np.sum(twosided ** 2) / 2048 == pytest.approx(np.sum(record ** 2), rel=1e-9)


def test_zero_record_sits_on_the_db_floor():
    tf = dw.transfer_function(np.zeros(32), RATE, pad_to=256)
    np.testing.assert_allclose(tf.magnitude_db, 20.0 * math.log10(DB_FLOOR))


def test_deconvolution_by_the_same_signal_is_flat():
    rng = np.random.default_rng(3)
    sig = rng.standard_normal(400)
    tf = dw.transfer_function(sig, RATE, pad_to=1024, reference=sig)
    np.testing.assert_allclose(tf.magnitude_db, 0.0, atol=1e-9)


@pytest.mark.parametrize("kwargs,match", [
    (dict(record=np.zeros((4, 4)), rate=RATE), "1D"),
    (dict(record=np.zeros(0), rate=RATE), "1D"),
    (dict(record=np.zeros(8), rate=0.0), "rate"),
    (dict(record=np.zeros(8), rate=RATE, pad_to=4), "shorter"),
    (dict(record=np.zeros(8), rate=RATE, pad_to=100), "power of two"),
])
def test_transfer_function_validation(kwargs, match):
    with pytest.raises(ValidationError, match=match):
        dw.transfer_function(**kwargs)


def test_reference_shorter_than_pad(tmp_path):
    with pytest.raises(ValidationError, match="reference"):
        dw.transfer_function(np.zeros(8), RATE, pad_to=16, reference=np.zeros(64))


# --- find_formants -----------------------------------------------------------

def test_finds_known_mode_frequencies():
    record = damped_modes([700.0, 1900.0, 3100.0], 4000, RATE)
    tf = dw.transfer_function(record, RATE, pad_to=2 ** 16)
    got = dw.find_formants(tf, 3, f_min=100.0, f_max=5000.0)
    np.testing.assert_allclose(got.frequencies, [700.0, 1900.0, 3100.0], atol=2.0)
    assert not got.shortfall
    assert len(got) == 3


def test_takes_lowest_peaks_first_and_flags_shortfall():
    record = damped_modes([700.0, 1900.0, 3100.0], 4000, RATE)
    tf = dw.transfer_function(record, RATE, pad_to=2 ** 16)
    first = dw.find_formants(tf, 1, f_min=100.0, f_max=5000.0)
    assert first.frequencies[0] == pytest.approx(700.0, abs=2.0)
    many = dw.find_formants(tf, 8, f_min=100.0, f_max=5000.0)
    assert many.shortfall
    assert many.requested == 8
    assert len(many) == 3


def test_band_limits_are_honored():
    record = damped_modes([700.0, 1900.0, 3100.0], 4000, RATE)
    tf = dw.transfer_function(record, RATE, pad_to=2 ** 16)
    mid = dw.find_formants(tf, 3, f_min=1000.0, f_max=2500.0)
    np.testing.assert_allclose(mid.frequencies, [1900.0], atol=2.0)


def test_prominence_threshold_rejects_ripple():
    freqs = np.linspace(0.0, 4000.0, 4001)
    curve = np.zeros(4001)
    bump = 80.0 * np.exp(-0.5 * ((freqs - 1000.0) / 40.0) ** 2)   # real peak
    ripple = 1.0 * np.cos(2.0 * math.pi * freqs / 50.0)           # 2 dB swings
    tf = dw.TransferFunction(freqs=freqs, magnitude_db=curve + bump + ripple,
                             source_rate=8000.0, n_samples=None)
    got = dw.find_formants(tf, 5, f_min=10.0, f_max=4000.0, prominence_db=3.0)
    assert got.frequencies.size == 1
    assert got.frequencies[0] == pytest.approx(1000.0, abs=1.0)


def test_truncated_undecayed_record_does_not_fool_the_picker():
    # a pure tone cut off mid-ring: the rectangular truncation turns the line
    # into a sinc comb whose sidelobes are all locally prominent
    n = 5000
    t = np.arange(n) / RATE
    record = np.sin(2.0 * math.pi * 800.0 * t)
    tf = dw.transfer_function(record, RATE, pad_to=2 ** 17)
    got = dw.find_formants(tf, 1, f_min=100.0, f_max=5000.0)
    assert got.frequencies[0] == pytest.approx(800.0, abs=2.0 * RATE / n)
    # the same curve treated as an infinite-record sweep keeps the comb
    raw = dw.TransferFunction(freqs=tf.freqs, magnitude_db=tf.magnitude_db,
                              source_rate=tf.source_rate, n_samples=None)
    comb = dw.find_formants(raw, 1, f_min=100.0, f_max=5000.0)
    assert abs(comb.frequencies[0] - 800.0) > 4.0 * RATE / n


def test_peak_curve_passthrough_for_oracle_spectra():
    freqs = np.linspace(0.0, 4000.0, 512)
    db = np.random.default_rng(0).standard_normal(512)
    tf = dw.TransferFunction(freqs=freqs, magnitude_db=db, source_rate=8000.0,
                             n_samples=None)
    assert _peak_curve(tf) is tf.magnitude_db


def test_parabolic_refinement_beats_the_grid():
    # place the true mode off the bin centers; refinement should land within
    # a tenth of a bin rather than half a bin
    record = damped_modes([702.3], 4000, RATE)
    tf = dw.transfer_function(record, RATE, pad_to=2 ** 15)
    got = dw.find_formants(tf, 1, f_min=100.0, f_max=5000.0)
    assert got.frequencies[0] == pytest.approx(702.3, abs=0.4 * tf.resolution)


@pytest.mark.parametrize("f_min,f_max", [(-1.0, 100.0), (200.0, 100.0),
                                         (100.0, 1e9)])
def test_find_formants_band_validation(f_min, f_max):
    tf = dw.TransferFunction(freqs=np.linspace(0, 16000, 1024),
                             magnitude_db=np.zeros(1024), source_rate=RATE)
    with pytest.raises(ValidationError):
        dw.find_formants(tf, 1, f_min=f_min, f_max=f_max)


def test_find_formants_needs_samples_in_band():
    tf = dw.TransferFunction(freqs=np.linspace(0, 16000, 1024),
                             magnitude_db=np.zeros(1024), source_rate=RATE)
    with pytest.raises(ValidationError, match="fewer than 3"):
        dw.find_formants(tf, 1, f_min=100.0, f_max=110.0)
    with pytest.raises(ValidationError, match="count"):
        dw.find_formants(tf, 0, f_min=100.0, f_max=5000.0)


@settings(max_examples=25, deadline=None)
@given(gain_db=st.floats(-60.0, 60.0))
def test_formants_invariant_under_gain(gain_db):
    record = damped_modes([700.0, 1900.0], 4000, RATE)
    tf = dw.transfer_function(record * 10 ** (gain_db / 20.0), RATE, pad_to=2 ** 16)
    base = dw.transfer_function(record, RATE, pad_to=2 ** 16)
    a = dw.find_formants(tf, 2, f_min=100.0, f_max=5000.0)
    b = dw.find_formants(base, 2, f_min=100.0, f_max=5000.0)
    np.testing.assert_allclose(a.frequencies, b.frequencies, atol=1e-6)


# --- FormantSet / comparison -------------------------------------------------

def test_formant_set_must_ascend():
    with pytest.raises(ValidationError):
        dw.FormantSet(frequencies=np.array([500.0, 400.0]),
                      magnitudes_db=np.zeros(2), requested=2)
    with pytest.raises(ValidationError):
        dw.FormantSet(frequencies=np.array([500.0]),
                      magnitudes_db=np.zeros(2), requested=2)


def test_comparison_numbers_and_text():
    measured = dw.FormantSet(frequencies=np.array([510.0, 1480.0]),
                             magnitudes_db=np.zeros(2), requested=2)
    reference = dw.FormantSet(frequencies=np.array([500.0, 1500.0]),
                              magnitudes_db=np.zeros(2), requested=2)
    cmp = dw.compare_formants(measured, reference)
    np.testing.assert_allclose(cmp.delta_hz, [10.0, -20.0])
    np.testing.assert_allclose(cmp.delta_pct, [2.0, -100.0 * 20.0 / 1500.0])
    d = cmp.to_dict()
    assert d["max_abs_pct"] == pytest.approx(2.0)
    text = cmp.to_text()
    assert "F1" in text and "F2" in text
    assert "+10 Hz" in text and "+2.00 %" in text


def test_comparison_requires_equal_lengths():
    a = dw.FormantSet(frequencies=np.array([500.0]), magnitudes_db=np.zeros(1),
                      requested=1)
    b = dw.FormantSet(frequencies=np.array([500.0, 1500.0]),
                      magnitudes_db=np.zeros(2), requested=2)
    with pytest.raises(ValidationError):
        dw.compare_formants(a, b)


# --- exports -----------------------------------------------------------------

def test_transfer_function_csv(tmp_path):
    tf = dw.TransferFunction(freqs=np.linspace(0, 16000, 256),
                             magnitude_db=np.linspace(-10, 10, 256),
                             source_rate=RATE)
    full = tmp_path / "tf.csv"
    dw.analysis.write_transfer_function_csv(tf, full)
    lines = full.read_text().splitlines()
    assert lines[0] == "freq_hz,magnitude_db"
    assert len(lines) == 257
    cut = tmp_path / "tf_cut.csv"
    dw.analysis.write_transfer_function_csv(tf, cut, f_max=8000.0)
    table = np.loadtxt(cut, delimiter=",", skiprows=1)
    assert table[-1, 0] <= 8000.0
    np.testing.assert_allclose(table[:, 1],
                               tf.magnitude_db[:table.shape[0]], rtol=1e-9)


def test_formants_json(tmp_path):
    fs = dw.FormantSet(frequencies=np.array([500.0, 1500.0]),
                       magnitudes_db=np.array([12.0, 9.0]), requested=2)
    path = tmp_path / "formants.json"
    dw.analysis.write_formants_json(fs, path, extra={"note": "check"})
    payload = json.loads(path.read_text())
    assert payload["frequencies_hz"] == [500.0, 1500.0]
    assert payload["requested"] == 2
    assert payload["shortfall"] is False
    assert payload["note"] == "check"
