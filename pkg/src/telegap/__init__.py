"""Spin-chain model of Bell-pair teleportation: exact ground state, exact spectra and
variational excitation gaps."""

__version__ = "0.1.0"

from .tensor import ChainOperator, ChainShape, DensityMatrix, LocalTerm, StateVector  # noqa: E402
from .eigensolve import ConvergenceError, SpectrumResult, lowest_k, lowest_k_constrained  # noqa: E402
from .model import ModelParams, build_chain, build_create_pair, build_projection, build_unit  # noqa: E402
from .ground_state import (  # noqa: E402
    Isometry,
    assemble_ground_state,
    bell_fidelity,
    cap_density_matrix,
    g0_isometry,
    psi0,
)

__all__ = [
    "ChainOperator",
    "ChainShape",
    "DensityMatrix",
    "LocalTerm",
    "StateVector",
    "ConvergenceError",
    "SpectrumResult",
    "lowest_k",
    "lowest_k_constrained",
    "ModelParams",
    "build_chain",
    "build_create_pair",
    "build_projection",
    "build_unit",
    "Isometry",
    "assemble_ground_state",
    "bell_fidelity",
    "cap_density_matrix",
    "g0_isometry",
    "psi0",
]
