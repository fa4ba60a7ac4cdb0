"""End-to-end pipeline runs on a small fast tube: artifacts, determinism,
benchmark report shape."""

import json
import math

import numpy as np
import pytest

import depthwave as dw
from depthwave.config import RunConfig
from depthwave.errors import ValidationError
from depthwave.pipeline import (BenchReport, export_depthmap, load_area_function,
                                mic_probe, run_benchmark, run_oracle_comparison,
                                run_pipeline)


@pytest.fixture(scope="module")
def small_tube(tmp_path_factory):
    """50 mm closed-open tube on a coarse 1 mm grid: resonances near
    1750/5250/8750 Hz, fractions of a second to simulate."""
    path = tmp_path_factory.mktemp("af") / "short_tube.txt"
    af = dw.AreaFunction(positions=np.array([0.0, 0.05]),
                         areas=np.full(2, math.pi * 0.004 ** 2), name="short_tube")
    dw.write_area_function(af, path)
    return path


def small_config(small_tube, out_dir, **overrides) -> RunConfig:
    base = dict(area_function_path=str(small_tube), ds=1e-3, nx=60, ny=17,
                duration_s=3e-3, pulse_length=256, pad_to=2 ** 17,
                formant_count=3, formant_max_hz=10000.0,
                out_dir=str(out_dir))
    base.update(overrides)
    return RunConfig(**base)


def test_load_area_function_resolution(small_tube):
    af = load_area_function(str(small_tube))
    assert af.name == "short_tube"
    assert load_area_function("uniform").name == "uniform"
    with pytest.raises(ValidationError, match="no area function"):
        load_area_function("")
    with pytest.raises(ValidationError, match="built-in"):
        load_area_function("no_such_tube.txt")


def test_mic_probe_sits_inside_the_open_end(small_tube):
    cfg = small_config(small_tube, "unused")
    af = load_area_function(str(small_tube))
    grid = dw.GridSpec(nx=60, ny=17, ds=1e-3)
    assert mic_probe(cfg, af, grid) == (47, 8.0)


def test_run_pipeline_writes_every_artifact(small_tube, tmp_path):
    cfg = small_config(small_tube, tmp_path / "out")
    result = run_pipeline(cfg)
    paths = result["paths"]
    expected = {"probes_csv", "probes_wav", "probes_44k_wav",
                "transfer_function_csv", "formants_json", "metadata_json",
                "waveform_png", "spectrum_png", "depthmap_png"}
    assert set(paths) == expected
    for kind, p in paths.items():
        assert (tmp_path / "out" / p.split("/")[-1]).exists(), kind

    formants = result["formants"]
    assert len(formants) >= 1
    assert formants.frequencies[0] == pytest.approx(1750.0, rel=0.25)

    meta = json.loads((tmp_path / "out" / "run_metadata.json").read_text())
    assert meta["grid"] == [60, 17]
    assert meta["n_steps"] == cfg.n_steps
    assert meta["cell_counts"]["air"] > 0
    assert meta["config"]["area_function_path"] == str(small_tube)

    payload = json.loads((tmp_path / "out" / "formants.json").read_text())
    assert payload["frequencies_hz"] == list(formants.frequencies)

    table = np.loadtxt(tmp_path / "out" / "transfer_function.csv",
                       delimiter=",", skiprows=1)
    assert table[-1, 0] <= cfg.formant_max_hz


def test_pipeline_runs_are_reproducible(small_tube, tmp_path):
    a = small_config(small_tube, tmp_path / "a")
    b = small_config(small_tube, tmp_path / "b")
    run_pipeline(a)
    run_pipeline(b)
    assert (tmp_path / "a" / "probes.csv").read_bytes() \
        == (tmp_path / "b" / "probes.csv").read_bytes()


def test_parallel_workers_give_the_same_records(small_tube, tmp_path):
    serial = small_config(small_tube, tmp_path / "s")
    par = small_config(small_tube, tmp_path / "p", workers=2)
    run_pipeline(serial)
    run_pipeline(par)
    assert (tmp_path / "s" / "probes.csv").read_bytes() \
        == (tmp_path / "p" / "probes.csv").read_bytes()


def test_oracle_comparison_artifacts(small_tube, tmp_path):
    cfg = small_config(small_tube, tmp_path / "cmp")
    result = run_oracle_comparison(cfg)
    out = tmp_path / "cmp"
    for name in ("comparison.txt", "comparison.json", "oracle_spectrum.csv",
                 "spectrum_overlay.png"):
        assert (out / name).exists()
    cmp = result["comparison"]
    assert cmp.measured.frequencies.size == cmp.reference.frequencies.size >= 1
    assert "F1" in (out / "comparison.txt").read_text()
    payload = json.loads((out / "comparison.json").read_text())
    assert "max_abs_pct" in payload
    assert isinstance(result["shortfall"], bool)
    # the coarse grid is rough, but F1 should not be wildly off the oracle
    assert abs(cmp.delta_pct[0]) < 20.0


def test_benchmark_report(small_tube, tmp_path):
    cfg = small_config(small_tube, tmp_path / "bench", duration_s=1e-3)
    report = run_benchmark(cfg, worker_counts=(2,), repeats=1)
    assert report.grid == (60, 17)
    assert report.steps == cfg.n_steps
    assert set(report.seconds) == {"2d_serial", "2p5d_serial", "2p5d_parallel_x2"}
    assert all(v > 0 for v in report.seconds.values())
    assert math.isfinite(report.overhead_pct)
    assert set(report.speedups) == {2}

    out = tmp_path / "bench"
    assert sorted(p.name for p in out.iterdir()) == ["bench.json", "bench.png"]
    payload = json.loads((out / "bench.json").read_text())
    assert payload["steps"] == report.steps
    assert payload["depth_overhead_pct"] == report.overhead_pct
    assert "2" in payload["parallel_speedups"]

    text = report.to_text()
    assert "steps/s" in text and "overhead" in text

    with pytest.raises(ValidationError, match="repeats"):
        run_benchmark(cfg, repeats=0)


def test_bench_report_rejects_nonpositive_timings():
    with pytest.raises(ValidationError, match="positive"):
        BenchReport(grid=(4, 4), steps=10, seconds={"2d_serial": 0.0},
                    overhead_pct=0.0, speedups={})


def test_export_depthmap(small_tube, tmp_path):
    cfg = small_config(small_tube, tmp_path / "dm")
    result = export_depthmap(cfg)
    out = tmp_path / "dm"
    assert (out / "depthmap.csv").exists()
    assert (out / "depthmap.png").exists()
    dom = result["domain"]
    assert (dom.grid.nx, dom.grid.ny) == (60, 17)
    header = (out / "depthmap.csv").read_text().splitlines()[0]
    assert header == "x,y,d_bar,d_x,d_y"
