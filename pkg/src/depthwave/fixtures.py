"""Synthetic area-function fixtures.

Real vocal-tract area functions are user-supplied; these three cover the
shapes the validation needs: a uniform tube with known analytic resonances,
an abrupt two-tube step, and a smooth cosine horn. Builders are exact; the
files shipped under data/ are the same tubes written out in the text format
users provide their own data in.
"""

from __future__ import annotations

import math
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .geometry import AreaFunction, parse_area_function

FIXTURE_NAMES = ("uniform", "two_tube", "cosine_horn")


def uniform_tube(length: float = 0.175, radius: float = 0.008) -> AreaFunction:
    """Closed-open straight tube; resonances at odd multiples of c/4L."""
    area = math.pi * radius * radius
    return AreaFunction(positions=np.array([0.0, length]),
                        areas=np.array([area, area]), name="uniform")


def two_tube(length: float = 0.175, area_back: float = 1e-4,
             area_front: float = 3e-4) -> AreaFunction:
    """Two equal-length cylinders with an area step at the midpoint. The
    step is blended over 0.2 mm so the radius profile stays single-valued."""
    half = 0.5 * length
    return AreaFunction(
        positions=np.array([0.0, half - 1e-4, half + 1e-4, length]),
        areas=np.array([area_back, area_back, area_front, area_front]),
        name="two_tube")


def cosine_horn(length: float = 0.17, r_throat: float = 0.004,
                r_mouth: float = 0.010, samples: int = 171) -> AreaFunction:
    """Raised-cosine flare from throat to mouth radius; smooth enough that
    the 1D horn picture holds well."""
    s = np.linspace(0.0, length, samples)
    r = r_throat + (r_mouth - r_throat) * 0.5 * (1.0 - np.cos(math.pi * s / length))
    return AreaFunction(positions=s, areas=math.pi * r * r, name="cosine_horn")


_BUILDERS = {"uniform": uniform_tube, "two_tube": two_tube, "cosine_horn": cosine_horn}


def fixture_path(name: str) -> Path:
    if name not in FIXTURE_NAMES:
        raise ValidationError(f"unknown fixture {name!r}; available: {', '.join(FIXTURE_NAMES)}")
    return Path(str(resources.files("depthwave").joinpath("data", f"{name}.txt")))


def load_fixture(name: str) -> AreaFunction:
    path = fixture_path(name)
    return parse_area_function(path.read_text(), name=name)


def build_fixture(name: str) -> AreaFunction:
    """The exact in-memory counterpart of a shipped fixture file."""
    if name not in _BUILDERS:
        raise ValidationError(f"unknown fixture {name!r}; available: {', '.join(FIXTURE_NAMES)}")
    return _BUILDERS[name]()
