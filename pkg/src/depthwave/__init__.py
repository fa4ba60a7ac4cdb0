"""2.5D finite-difference time-domain acoustics for depth-symmetric tubes.

The package turns a vocal-tract area function into a mid-sagittal cell grid
with per-cell depth maps, propagates a band-limited pulse through it on a
staggered leapfrog scheme whose pressure update carries the depth weights,
and extracts resonance (formant) frequencies from the recorded impulse
response. An independent 1D chain-matrix horn model provides reference
resonances for validation.
"""

__version__ = "0.1.0"

from .analysis import (FormantComparison, FormantSet, TransferFunction,
                       compare_formants, find_formants, transfer_function)
from .config import RunConfig, load_config, save_config
from .errors import DivergenceError, ValidationError
from .fixtures import (FIXTURE_NAMES, build_fixture, cosine_horn, fixture_path,
                       load_fixture, two_tube, uniform_tube)
from .geometry import (RADIUS_SCALE, AreaFunction, CellType, DepthMap, GridSpec,
                       PhysicalConstants, SimDomain, assemble_domain,
                       build_contour, build_depth_map, parse_area_function,
                       raw_edge_depths, scale_radii, write_area_function)
from .horn import (SegmentChain, chain_from_area_function, chain_matrix,
                   input_output_response, oracle_formants, response_spectrum)
from .pipeline import (BenchReport, export_depthmap, run_benchmark,
                       run_oracle_comparison, run_pipeline)
from .solver import (BoundaryField, ExcitationSignal, FieldState, ProbeRecords,
                     SimParams, Stepper, field_energy, make_pulse,
                     max_stable_dt, new_state, run, run_2d_reference,
                     run_parallel, step_pressure, step_velocity,
                     write_records_csv, write_records_wav)

__all__ = [
    "__version__",
    "AreaFunction", "BenchReport", "BoundaryField", "CellType", "DepthMap",
    "DivergenceError", "ExcitationSignal", "FIXTURE_NAMES", "FieldState",
    "FormantComparison", "FormantSet", "GridSpec", "PhysicalConstants",
    "ProbeRecords", "RADIUS_SCALE", "RunConfig", "SegmentChain", "SimDomain",
    "SimParams", "Stepper", "TransferFunction", "ValidationError",
    "assemble_domain", "build_contour", "build_depth_map", "build_fixture",
    "chain_from_area_function", "chain_matrix", "compare_formants",
    "cosine_horn", "export_depthmap", "field_energy", "find_formants",
    "fixture_path", "input_output_response", "load_config", "load_fixture",
    "make_pulse", "max_stable_dt", "new_state", "oracle_formants",
    "parse_area_function", "raw_edge_depths", "response_spectrum", "run",
    "run_2d_reference", "run_benchmark", "run_oracle_comparison",
    "run_parallel", "run_pipeline", "save_config", "scale_radii",
    "step_pressure", "step_velocity", "transfer_function", "two_tube",
    "uniform_tube", "write_area_function", "write_records_csv",
    "write_records_wav",
]
