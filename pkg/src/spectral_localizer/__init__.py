"""Topological invariants of finite lattice models via the spectral localizer."""

from .errors import (
    AmbiguousFlowError,
    ConfigError,
    DimensionError,
    GapClosedError,
    GeometryError,
    LocalizerError,
    NumericalFailure,
)
from .inertia import Inertia, half_signature, inertia_ldl, signature, spectral_gap
from .lattice import LatticeGeometry, SparseComplex, SparseHermitian
from .localizer import (
    BoundsReport,
    LocalizerParams,
    assemble_even_localizer,
    assemble_odd_localizer,
    build_dirac,
    check_bounds,
    local_marker_map,
)
from .models import DisorderRealization, ModelParams, build_clean_pip, build_dirty, sample_disorder

__version__ = "0.1.0"

__all__ = [
    "AmbiguousFlowError", "ConfigError", "DimensionError", "GapClosedError", "GeometryError",
    "LocalizerError", "NumericalFailure", "Inertia", "half_signature", "inertia_ldl", "signature",
    "spectral_gap", "LatticeGeometry", "SparseComplex", "SparseHermitian", "BoundsReport",
    "LocalizerParams", "assemble_even_localizer", "assemble_odd_localizer", "build_dirac",
    "check_bounds", "local_marker_map", "DisorderRealization", "ModelParams", "build_clean_pip",
    "build_dirty", "sample_disorder",
]
