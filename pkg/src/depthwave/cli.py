"""Command-line front end.

Verbs: run (full pipeline), oracle (1D chain reference only), compare (2.5D
vs oracle table), bench (solver timing variants), depthmap (geometry export).
A --config file supplies defaults; explicit flags override it. Exit codes:
0 success, 1 validation/config error, 2 runtime divergence.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

from .analysis import write_formants_json, write_transfer_function_csv
from .config import RunConfig, load_config, save_config
from .errors import DivergenceError, ValidationError
from .horn import chain_from_area_function, oracle_formants, response_spectrum
from .pipeline import (export_depthmap, load_area_function, run_benchmark,
                       run_oracle_comparison, run_pipeline)

_FLAG_FIELDS = [f.name for f in fields(RunConfig)]


def _add_config_flags(p: argparse.ArgumentParser, include_area: bool = True):
    if include_area:
        p.add_argument("area", nargs="?", default=None,
                       help="area-function file, or a built-in fixture name "
                            "(uniform, two_tube, cosine_horn)")
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--ds", type=float, default=None, help="grid spacing [m]")
    p.add_argument("--nx", type=int, default=None)
    p.add_argument("--ny", type=int, default=None)
    p.add_argument("--dt", default=None, help="time step [s], or 'auto' for the stability bound")
    p.add_argument("--duration", type=float, default=None, dest="duration_s",
                   help="simulated time [s]")
    p.add_argument("--c", type=float, default=None, help="sound speed [m/s]")
    p.add_argument("--rho", type=float, default=None, help="air density [kg/m^3]")
    p.add_argument("--mu", type=float, default=None, help="wall coefficient, 0..1")
    p.add_argument("--mic-offset", type=float, default=None, dest="mic_offset_m",
                   help="probe distance inside the open end [m]")
    p.add_argument("--pulse-length", type=int, default=None)
    p.add_argument("--pulse-low", type=float, default=None, dest="pulse_low_hz")
    p.add_argument("--pulse-high", type=float, default=None, dest="pulse_high_hz")
    p.add_argument("--pulse-amplitude", type=float, default=None)
    p.add_argument("--wall-form", choices=("admittance", "impedance"), default=None,
                   dest="wall_form")
    p.add_argument("--no-radius-scale", action="store_true",
                   help="keep the raw areas instead of the mode-corrected radii")
    p.add_argument("--min-depth", type=float, default=None, dest="min_depth")
    p.add_argument("--open-space-depth", type=float, default=None, dest="open_space_depth")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--formants", type=int, default=None, dest="formant_count")
    p.add_argument("--f-min", type=float, default=None, dest="formant_min_hz")
    p.add_argument("--f-max", type=float, default=None, dest="formant_max_hz")
    p.add_argument("--deconvolve", action="store_true",
                   help="divide the spectrum by the source pulse spectrum")
    p.add_argument("--oracle-segment", type=float, default=None, dest="oracle_segment_m")
    p.add_argument("--out", default=None, dest="out_dir", help="output directory")


def _build_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    for name in _FLAG_FIELDS:
        if hasattr(args, name) and getattr(args, name) is not None:
            overrides[name] = getattr(args, name)
    if getattr(args, "area", None):
        overrides["area_function_path"] = args.area
    if getattr(args, "no_radius_scale", False):
        overrides["radius_scale"] = False
    if getattr(args, "deconvolve", False):
        overrides["deconvolve"] = True
    if "dt" in overrides and overrides["dt"] != "auto":
        overrides["dt"] = float(overrides["dt"])
    merged = {f.name: getattr(cfg, f.name) for f in fields(RunConfig)}
    merged.update(overrides)
    return RunConfig(**merged)


def _cmd_run(args) -> int:
    cfg = _build_config(args)
    result = run_pipeline(cfg)
    save_config(cfg, Path(cfg.out_dir) / "run_config.txt")
    f = result["formants"]
    print(f"{cfg.area_function_path}: {len(f)} formants "
          + " ".join(f"{v:.1f}" for v in f.frequencies) + " Hz"
          + (" (shortfall)" if f.shortfall else ""))
    for kind, path in result["paths"].items():
        print(f"  {kind:<22} {path}")
    return 0


def _cmd_oracle(args) -> int:
    cfg = _build_config(args)
    af = load_area_function(cfg.area_function_path)
    chain = chain_from_area_function(af, cfg.oracle_segment_m, c=cfg.c, rho=cfg.rho)
    formants = oracle_formants(chain, cfg.formant_count, f_max=cfg.formant_max_hz)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_formants_json(formants, out / "oracle_formants.json",
                        extra={"segments": int(chain.lengths.size),
                               "area_function": cfg.area_function_path})
    write_transfer_function_csv(response_spectrum(chain, f_max=cfg.formant_max_hz),
                                out / "oracle_spectrum.csv")
    print(f"{cfg.area_function_path}: oracle ({chain.lengths.size} segments) "
          + " ".join(f"{v:.1f}" for v in formants.frequencies) + " Hz"
          + (" (shortfall)" if formants.shortfall else ""))
    print(f"  formants_json          {out / 'oracle_formants.json'}")
    print(f"  spectrum_csv           {out / 'oracle_spectrum.csv'}")
    return 0


def _cmd_compare(args) -> int:
    cfg = _build_config(args)
    result = run_oracle_comparison(cfg)
    print(result["comparison"].to_text())
    if result["shortfall"]:
        print(f"(shortfall: requested {cfg.formant_count}, "
              f"comparing {len(result['comparison'].measured)})")
    for kind, path in result["paths"].items():
        print(f"  {kind:<22} {path}")
    return 0


def _cmd_bench(args) -> int:
    cfg = _build_config(args)
    workers = [int(w) for w in args.workers_list.split(",") if w.strip()]
    if not workers:
        raise ValidationError("--workers-list must name at least one worker count")
    report = run_benchmark(cfg, worker_counts=workers, repeats=args.repeats)
    print(report.to_text())
    print(f"  report                 {Path(cfg.out_dir) / 'bench.json'}")
    return 0


def _cmd_depthmap(args) -> int:
    cfg = _build_config(args)
    result = export_depthmap(cfg)
    dom = result["domain"]
    print(f"{cfg.area_function_path}: grid {dom.grid.nx}x{dom.grid.ny}, "
          f"ds {dom.grid.ds:g} m")
    for kind, path in result["paths"].items():
        print(f"  {kind:<22} {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="depthwave",
        description="2.5D FDTD acoustics for depth-symmetric tubes")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate and extract formants")
    _add_config_flags(p_run)
    p_run.set_defaults(fn=_cmd_run)

    p_oracle = sub.add_parser("oracle", help="1D chain-matrix reference only")
    _add_config_flags(p_oracle)
    p_oracle.set_defaults(fn=_cmd_oracle)

    p_cmp = sub.add_parser("compare", help="2.5D vs oracle formant table")
    _add_config_flags(p_cmp)
    p_cmp.set_defaults(fn=_cmd_compare)

    p_bench = sub.add_parser("bench", help="time the solver variants")
    _add_config_flags(p_bench)
    p_bench.add_argument("--workers-list", default="2,4",
                         help="comma-separated worker counts (default 2,4)")
    p_bench.add_argument("--repeats", type=int, default=3)
    p_bench.set_defaults(fn=_cmd_bench)

    p_dm = sub.add_parser("depthmap", help="export the depth map (CSV + PNG)")
    _add_config_flags(p_dm)
    p_dm.set_defaults(fn=_cmd_depthmap)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
