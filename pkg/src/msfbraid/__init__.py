"""Majorana braiding on a 2D p+ip lattice.

Lattice model, band topology, spectral analysis, a protocol language and
compiler for moving defects, adiabatic evolution of zero modes, and Gaussian
state observables.
"""

from .bloch import BlochParams, chern_number
from .config import RunConfig, load, preset, resolve
from .engine import (
    BraidResult,
    Evolution,
    braid_result,
    evolve,
    exchange_matrix,
    ideal_exchange,
    noncommutativity_check,
)
from .errors import ConfigError, GapClosedError, MSFError, NumericError, ProtocolError
from .lattice import Boundary, CouplingParams, LatticeGeometry, NoiseConfig, build_skew_matrix, defect_potential
from .observables import CovarianceMatrix, fusion_report, ground_covariance, pfaffian
from .protocol import compile_program, parse
from .spectral import canonical_form, quasiparticle_spectrum, zero_modes

__version__ = "0.1.0"

__all__ = [
    "BlochParams",
    "Boundary",
    "BraidResult",
    "ConfigError",
    "CouplingParams",
    "CovarianceMatrix",
    "Evolution",
    "GapClosedError",
    "LatticeGeometry",
    "MSFError",
    "NoiseConfig",
    "NumericError",
    "ProtocolError",
    "RunConfig",
    "braid_result",
    "build_skew_matrix",
    "canonical_form",
    "chern_number",
    "compile_program",
    "defect_potential",
    "evolve",
    "exchange_matrix",
    "fusion_report",
    "ground_covariance",
    "ideal_exchange",
    "load",
    "noncommutativity_check",
    "parse",
    "pfaffian",
    "preset",
    "quasiparticle_spectrum",
    "resolve",
    "zero_modes",
    "__version__",
]
