"""End-to-end runs: geometry -> solver -> analysis -> artifacts on disk.

Three entry points, matching the CLI verbs: run_pipeline produces the probe
records, spectra, formants and figures for one tube; run_oracle_comparison
runs the same tube through both the 2.5D solver and the 1D chain oracle and
tabulates the formant differences; run_benchmark times the solver variants
against each other and writes no physics artifacts at all.
"""

from __future__ import annotations

import json
import math
import platform
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from . import __version__
from .analysis import (FormantSet, compare_formants, find_formants,
                       transfer_function, write_formants_json,
                       write_transfer_function_csv)
from .config import RunConfig
from .errors import ValidationError
from .fixtures import FIXTURE_NAMES, load_fixture
from .geometry import (CellType, GridSpec, PhysicalConstants, SimDomain,
                       assemble_domain, export_depth_map_csv,
                       parse_area_function)
from .horn import chain_from_area_function, oracle_formants, response_spectrum
from .plots import (save_bench_png, save_depthmap_png, save_spectrum_png,
                    save_waveform_png)
from .solver import (SimParams, make_pulse, run, run_2d_reference,
                     run_parallel, write_records_csv, write_records_wav)

WAV_DECIMATION = 15  # 2.5D reference rate 661.5 kHz / 15 = 44.1 kHz


def load_area_function(spec: str):
    """Area function from a file path, or from a named built-in fixture."""
    if not spec:
        raise ValidationError("no area function given (file path or fixture name)")
    path = Path(spec)
    if path.is_file():
        return parse_area_function(path.read_text(), name=path.stem)
    if spec in FIXTURE_NAMES:
        return load_fixture(spec)
    raise ValidationError(
        f"area function {spec!r}: no such file, and not one of the built-in "
        f"fixtures ({', '.join(FIXTURE_NAMES)})")


def build_domain(cfg: RunConfig, af=None) -> SimDomain:
    if af is None:
        af = load_area_function(cfg.area_function_path)
    grid = GridSpec(ds=cfg.ds, nx=cfg.nx, ny=cfg.ny)
    constants = PhysicalConstants(c=cfg.c, rho=cfg.rho, mu=cfg.mu)
    return assemble_domain(af, grid, constants=constants,
                           min_depth=cfg.min_depth if cfg.min_depth > 0 else None,
                           open_space_depth=cfg.open_space_depth,
                           apply_radius_scale=cfg.radius_scale)


def mic_probe(cfg: RunConfig, af, grid: GridSpec) -> tuple[int, int]:
    """Probe cell on the tube axis, round(mic_offset/ds) cells inside the
    open end."""
    n_cols = int(round(af.length / grid.ds))
    inset = int(round(cfg.mic_offset_m / grid.ds))
    return n_cols - inset, grid.axis_row


def _simulate(cfg: RunConfig, domain: SimDomain, probes):
    dt = cfg.resolved_dt()
    params = SimParams(dt=dt, duration=cfg.duration_s,
                       diagnostics_interval=cfg.diagnostics_interval)
    pulse = make_pulse(dt, length=cfg.pulse_length, low_cut=cfg.pulse_low_hz,
                       high_cut=cfg.pulse_high_hz, amplitude=cfg.pulse_amplitude)
    if cfg.workers > 1:
        records = run_parallel(domain, params, pulse, probes, workers=cfg.workers,
                               wall_form=cfg.wall_form)
    else:
        records = run(domain, params, pulse, probes, wall_form=cfg.wall_form)
    return records, pulse


def _analyze(cfg: RunConfig, records, pulse):
    rate = 1.0 / records.dt
    reference = pulse.samples if cfg.deconvolve else None
    tf = transfer_function(records.data[0], rate, pad_to=cfg.pad_to, reference=reference)
    formants = find_formants(tf, cfg.formant_count, cfg.formant_min_hz, cfg.formant_max_hz)
    return tf, formants


def _metadata(cfg: RunConfig, domain: SimDomain, records, probe) -> dict:
    counts = {t.name.lower(): int((domain.cells == int(t)).sum()) for t in CellType}
    return {
        "config": asdict(cfg),
        "dt_s": records.dt,
        "n_steps": records.steps,
        "grid": [domain.grid.nx, domain.grid.ny],
        "cell_counts": counts,
        "probe_cell": list(probe),
        "workers": records.workers,
        "stepping_seconds": records.wall_seconds,
        "steps_per_second": records.steps_per_second,
        "package_version": __version__,
        "python": platform.python_version(),
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }


def run_pipeline(cfg: RunConfig) -> dict:
    """One full simulation; returns the artifact paths keyed by kind."""
    af = load_area_function(cfg.area_function_path)
    domain = build_domain(cfg, af)
    probe = mic_probe(cfg, af, domain.grid)
    records, pulse = _simulate(cfg, domain, [probe])
    tf, formants = _analyze(cfg, records, pulse)

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {k: out / v for k, v in {
        "probes_csv": "probes.csv",
        "probes_wav": "probes.wav",
        "probes_44k_wav": "probes_44k.wav",
        "transfer_function_csv": "transfer_function.csv",
        "formants_json": "formants.json",
        "metadata_json": "run_metadata.json",
        "waveform_png": "waveform.png",
        "spectrum_png": "spectrum.png",
        "depthmap_png": "depthmap.png",
    }.items()}

    write_records_csv(records, paths["probes_csv"])
    write_records_wav(records, paths["probes_wav"])
    down = resample_poly(records.data, 1, WAV_DECIMATION, axis=1).astype(np.float32)
    wav44 = down.T if down.shape[0] > 1 else down[0]
    wavfile.write(paths["probes_44k_wav"], int(round(1.0 / (records.dt * WAV_DECIMATION))), wav44)

    write_transfer_function_csv(tf, paths["transfer_function_csv"], f_max=cfg.formant_max_hz)
    write_formants_json(formants, paths["formants_json"],
                        extra={"band_hz": [cfg.formant_min_hz, cfg.formant_max_hz],
                               "area_function": cfg.area_function_path})
    with open(paths["metadata_json"], "w") as fh:
        json.dump(_metadata(cfg, domain, records, probe), fh, indent=2)
        fh.write("\n")

    save_waveform_png(records, paths["waveform_png"])
    save_spectrum_png(tf, formants, paths["spectrum_png"], f_max=cfg.formant_max_hz)
    save_depthmap_png(domain, paths["depthmap_png"])

    return {"paths": {k: str(v) for k, v in paths.items()},
            "formants": formants, "records": records, "transfer_function": tf}


def run_oracle_comparison(cfg: RunConfig) -> dict:
    """2.5D solver and 1D chain oracle on the same tube, formant for formant.

    The oracle always consumes the original (unscaled) areas: the radius
    scaling compensates a bias of the 2.5D scheme and has no business in the
    1D reference. Comparison uses however many formants both paths found,
    flagging a shortfall against the requested count.
    """
    af = load_area_function(cfg.area_function_path)
    domain = build_domain(cfg, af)
    probe = mic_probe(cfg, af, domain.grid)
    records, pulse = _simulate(cfg, domain, [probe])
    tf, measured = _analyze(cfg, records, pulse)

    chain = chain_from_area_function(af, cfg.oracle_segment_m, c=cfg.c, rho=cfg.rho)
    reference = oracle_formants(chain, cfg.formant_count, f_max=cfg.formant_max_hz)

    n = min(len(measured), len(reference))
    if n == 0:
        raise ValidationError("no formants found on at least one path; nothing to compare")
    shortfall = n < cfg.formant_count
    comparison = compare_formants(
        FormantSet(measured.frequencies[:n], measured.magnitudes_db[:n], n, shortfall),
        FormantSet(reference.frequencies[:n], reference.magnitudes_db[:n], n, shortfall))

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    txt = out / "comparison.txt"
    table = comparison.to_text()
    if shortfall:
        table += f"\n(shortfall: requested {cfg.formant_count}, comparing {n})"
    txt.write_text(table + "\n")
    payload = comparison.to_dict()
    payload["requested"] = cfg.formant_count
    payload["shortfall"] = shortfall
    with open(out / "comparison.json", "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    oracle_tf = response_spectrum(chain, f_max=cfg.formant_max_hz)
    write_transfer_function_csv(oracle_tf, out / "oracle_spectrum.csv")
    save_spectrum_png(tf, measured, out / "spectrum_overlay.png", oracle=oracle_tf,
                      f_max=cfg.formant_max_hz)

    return {"paths": {"comparison_txt": str(txt),
                      "comparison_json": str(out / "comparison.json"),
                      "oracle_spectrum_csv": str(out / "oracle_spectrum.csv"),
                      "spectrum_overlay_png": str(out / "spectrum_overlay.png")},
            "comparison": comparison, "measured": measured, "reference": reference,
            "shortfall": shortfall}


@dataclass
class BenchReport:
    grid: tuple
    steps: int
    seconds: dict
    overhead_pct: float
    speedups: dict

    def __post_init__(self):
        if any(t <= 0 for t in self.seconds.values()):
            raise ValidationError("benchmark timings must be positive")

    def to_dict(self) -> dict:
        return {"grid": list(self.grid), "steps": self.steps,
                "seconds": dict(self.seconds),
                "steps_per_second": {k: self.steps / v for k, v in self.seconds.items()},
                "depth_overhead_pct": self.overhead_pct,
                "parallel_speedups": {str(k): v for k, v in self.speedups.items()}}

    def to_text(self) -> str:
        lines = [f"grid {self.grid[0]}x{self.grid[1]}, {self.steps} steps"]
        for k, v in self.seconds.items():
            lines.append(f"  {k:<20} {v:8.3f} s   {self.steps / v:10.0f} steps/s")
        lines.append(f"  depth-term overhead  {self.overhead_pct:+.2f} %")
        for w, s in self.speedups.items():
            lines.append(f"  speedup x{w} workers   {s:.2f}")
        return "\n".join(lines)


def run_benchmark(cfg: RunConfig, worker_counts=(2, 4), repeats: int = 3,
                  write: bool = True) -> BenchReport:
    """Times the stepping loop only: plain-2D serial baseline, 2.5D serial,
    and 2.5D parallel per worker count, identical grids and step counts.
    Outputs are discarded; nothing physics-shaped lands in out_dir."""
    if repeats < 1:
        raise ValidationError("repeats must be >= 1")
    af = load_area_function(cfg.area_function_path)
    domain = build_domain(cfg, af)
    probe = mic_probe(cfg, af, domain.grid)
    dt = cfg.resolved_dt()
    params = SimParams(dt=dt, duration=cfg.duration_s,
                       diagnostics_interval=cfg.diagnostics_interval)
    pulse = make_pulse(dt, length=cfg.pulse_length, low_cut=cfg.pulse_low_hz,
                       high_cut=cfg.pulse_high_hz, amplitude=cfg.pulse_amplitude)
    warm = SimParams(dt=dt, duration=64 * dt, diagnostics_interval=cfg.diagnostics_interval)

    variants = [("2d_serial", run_2d_reference, {}), ("2p5d_serial", run, {})]
    for w in worker_counts:
        variants.append((f"2p5d_parallel_x{w}", run_parallel, {"workers": w}))

    # warm every variant first, then interleave the timed repeats round-robin
    # so slow clock or load drift hits all variants alike instead of
    # penalizing whichever happens to run last
    for _, fn, kw in variants:
        fn(domain, warm, pulse, [probe], **kw)
    seconds = {name: math.inf for name, _, _ in variants}
    for _ in range(repeats):
        for name, fn, kw in variants:
            t = fn(domain, params, pulse, [probe], **kw).wall_seconds
            seconds[name] = min(seconds[name], t)
    speedups = {w: seconds["2p5d_serial"] / seconds[f"2p5d_parallel_x{w}"]
                for w in worker_counts}
    overhead = 100.0 * (seconds["2p5d_serial"] - seconds["2d_serial"]) / seconds["2d_serial"]
    report = BenchReport(grid=(domain.grid.nx, domain.grid.ny), steps=params.n_steps,
                         seconds=seconds, overhead_pct=overhead, speedups=speedups)
    if write:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "bench.json", "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
        save_bench_png(list(seconds.keys()), list(seconds.values()), out / "bench.png")
    return report


def export_depthmap(cfg: RunConfig) -> dict:
    """Geometry-only artifact: the depth map as CSV plus a rendered view."""
    af = load_area_function(cfg.area_function_path)
    domain = build_domain(cfg, af)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "depthmap.csv"
    export_depth_map_csv(domain, csv_path)
    png_path = out / "depthmap.png"
    save_depthmap_png(domain, png_path)
    return {"paths": {"depthmap_csv": str(csv_path), "depthmap_png": str(png_path)},
            "domain": domain}
