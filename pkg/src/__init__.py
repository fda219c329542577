"""
Larsson random Cantor sets and their difference sets.

Parameters and regions, offset trees and product squares, the type kernel
and type space, Nystrom spectra, branching-process Monte Carlo and the
difference-set coverage check.
"""

from .cantor import OffsetTree, Square, level_intervals, phi, product_squares, sample_offset_tree
from .diffset import estimate_interval_prob, palis_lower_bound, run_trial
from .errors import ConfigError, InvariantViolation, LarssonError, NumericalError
from .intervals import IntervalSet
from .models import OutputBundle, RunConfig
from .params import Params, Region, classify, derive, validate
from .spectral import SpectralResult, assemble, build_grid, dominant_eigen
from .typespace import TypeSpace, build, default_epsilon

__version__ = "0.1.0"
__all__ = [
    "OffsetTree",
    "Square",
    "level_intervals",
    "phi",
    "product_squares",
    "sample_offset_tree",
    "estimate_interval_prob",
    "palis_lower_bound",
    "run_trial",
    # Errors
    "ConfigError",
    "InvariantViolation",
    "LarssonError",
    "NumericalError",
    "IntervalSet",
    "OutputBundle",
    "RunConfig",
    "Params",
    "Region",
    "classify",
    "derive",
    "validate",
    "SpectralResult",
    "assemble",
    "build_grid",
    "dominant_eigen",
    "TypeSpace",
    "build",
    "default_epsilon",
]
