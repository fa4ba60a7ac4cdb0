"""Run configuration: one flat key=value file, '#' comments.

Defaults reproduce the reference vocal-tract setup (0.74 mm grid spacing on
270x45 cells, c = 350 m/s, rho = 1.14 kg/m^3, wall coefficient 0.005, 50 ms
at the stability-bound time step, microphone 3 mm inside the mouth), so a
config that only names an area-function file runs that setup unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ValidationError
from .solver import max_stable_dt


@dataclass
class RunConfig:
    area_function_path: str = ""
    ds: float = 0.74e-3
    nx: int = 270
    ny: int = 45
    dt: str = "auto"              # seconds, or "auto" for the stability bound
    duration_s: float = 0.05
    c: float = 350.0
    rho: float = 1.14
    mu: float = 0.005
    mic_offset_m: float = 3.0e-3
    pulse_length: int = 2048
    pulse_low_hz: float = 20.0
    pulse_high_hz: float = 20000.0
    pulse_amplitude: float = 1.0
    wall_form: str = "admittance"
    radius_scale: bool = True
    min_depth: float = 0.0        # 0 = automatic (smallest raw chord / 100)
    open_space_depth: float = 0.05
    workers: int = 1
    formant_count: int = 8
    formant_min_hz: float = 100.0
    formant_max_hz: float = 10000.0
    deconvolve: bool = False
    pad_to: int = 2 ** 21
    oracle_segment_m: float = 0.005
    diagnostics_interval: int = 1000
    out_dir: str = "out"

    def __post_init__(self):
        for name in ("ds", "duration_s", "c", "rho", "mic_offset_m",
                     "pulse_high_hz", "pulse_amplitude", "oracle_segment_m"):
            if not (getattr(self, name) > 0):
                raise ValidationError(f"{name} must be > 0")
        if self.nx < 3 or self.ny < 3:
            raise ValidationError("grid must be at least 3x3")
        if self.mic_offset_m < self.ds:
            raise ValidationError(
                f"mic_offset_m {self.mic_offset_m} must be at least one cell ({self.ds})")
        if self.dt != "auto":
            try:
                val = float(self.dt)
            except (TypeError, ValueError):
                raise ValidationError(f"dt must be a number or 'auto', got {self.dt!r}") from None
            if val <= 0:
                raise ValidationError("dt must be > 0")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")
        if self.formant_count < 1:
            raise ValidationError("formant_count must be >= 1")

    def resolved_dt(self) -> float:
        if self.dt == "auto":
            return max_stable_dt(self.ds, self.c)
        return float(self.dt)

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.duration_s / self.resolved_dt() - 1e-9))


_BOOL = {"true": True, "false": False, "1": True, "0": False,
         "yes": True, "no": False, "on": True, "off": False}


def _field_types():
    return {f.name: f.type for f in fields(RunConfig)}


def _convert(name: str, ftype: str, raw: str):
    if ftype == "bool":
        low = raw.lower()
        if low not in _BOOL:
            raise ValidationError(f"{name}: expected a boolean, got {raw!r}")
        return _BOOL[low]
    if ftype == "int":
        try:
            return int(raw)
        except ValueError:
            raise ValidationError(f"{name}: expected an integer, got {raw!r}") from None
    if ftype == "float":
        try:
            return float(raw)
        except ValueError:
            raise ValidationError(f"{name}: expected a number, got {raw!r}") from None
    return raw


def load_config(path) -> RunConfig:
    """Parse a key=value config file into a RunConfig. Unknown keys are
    errors: silently ignoring a typo like 'duration=0.1' wastes an hour."""
    text = Path(path).read_text()
    types = _field_types()
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ValidationError(f"line {lineno}: expected key = value, got {line.strip()!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in types:
            raise ValidationError(f"line {lineno}: unknown config key {key!r}")
        ftype = "float" if key == "dt" and raw != "auto" else types[key]
        try:
            values[key] = _convert(key, ftype, raw)
        except ValidationError as err:
            raise ValidationError(f"line {lineno}: {err}") from None
    return RunConfig(**values)


def save_config(cfg: RunConfig, path) -> None:
    lines = ["# run configuration"]
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name} = {value}")
    Path(path).write_text("\n".join(lines) + "\n")
