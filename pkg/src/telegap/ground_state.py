"""The exact matrix-product ground state and its teleportation fidelity.

The cell isometry maps a logical bond qubit |b> to |psi0(b)> on
(qutrit, qutrit, outgoing bond). Chaining it from a Bell seed on the left cap
gives the zero-energy ground state; tracing out the qutrits turns each cell
into one step of a depolarizing channel on the bond.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import IDLE, ModelParams, basis_ket, bell_vector, check_theta
from .tensor import ChainShape, DensityMatrix, StateVector

__all__ = [
    "MAX_ASSEMBLY_ELL",
    "StateTooLargeError",
    "Isometry",
    "FidelityRecord",
    "psi0",
    "g0_isometry",
    "contract_chain",
    "assemble_ground_state",
    "depolarize_step",
    "isometry_channel",
    "cap_density_matrix",
    "single_fidelity",
    "infidelity",
    "bell_fidelity",
    "fidelity_sweep",
]

MAX_ASSEMBLY_ELL = 7


class StateTooLargeError(ValueError):
    """Explicit state assembly was requested beyond the storage limit."""


@dataclass(frozen=True)
class Isometry:
    """Map from a 2-dim bond into a cell space, stored as a (cell_dim, 2) column matrix.

    The cell space of an ``m``-cell isometry is (3, 3) * m followed by the
    outgoing 2-dim bond, so ``cell_dim = 2 * 9**m``.
    """

    columns: np.ndarray = field(repr=False)
    m: int = 1
    label: str = "g0"

    def __post_init__(self):
        cols = np.array(self.columns, copy=True)
        if cols.shape != (2 * 9 ** self.m, 2):
            raise ValueError(f"columns of shape {cols.shape} do not fit an m={self.m} cell")
        cols.setflags(write=False)
        object.__setattr__(self, "columns", cols)

    @property
    def cell_dim(self) -> int:
        return self.columns.shape[0]

    @property
    def cell_dims(self) -> tuple[int, ...]:
        return (3,) * (2 * self.m) + (2,)

    def tensor(self) -> np.ndarray:
        """Array indexed (bond_in, cell, bond_out) with cell of size 9**m."""
        return self.columns.T.reshape(2, 9 ** self.m, 2)

    def gram(self) -> np.ndarray:
        return self.columns.conj().T @ self.columns

    def isometry_error(self) -> float:
        return float(np.abs(self.gram() - np.eye(2)).max())

    def column(self, b: int) -> StateVector:
        return StateVector(ChainShape(self.cell_dims), self.columns[:, b])


@dataclass(frozen=True)
class FidelityRecord:
    theta: float
    ell: int
    f_single: float
    bell_weight: float
    phi_plus_overlap: float


def _psi0_array(b: int, theta: float) -> np.ndarray:
    dims = (3, 3, 2)
    c, s = np.cos(theta), np.sin(theta)
    v = c * np.kron(basis_ket(b, dims=(3,)), bell_vector(3, 2)) + 0.5 * s * basis_ket(IDLE, IDLE, b, dims=dims)
    return v / np.sqrt(c * c + 0.25 * s * s)


def psi0(b: int, theta: float) -> StateVector:
    """Zero-energy state of one unit carrying logical bit ``b`` on its outgoing qubit."""
    if b not in (0, 1):
        raise ValueError(f"b must be 0 or 1, got {b!r}")
    theta = check_theta(theta)
    return StateVector(ChainShape((3, 3, 2)), _psi0_array(b, theta))


def compose(outer: np.ndarray, inner: np.ndarray) -> np.ndarray:
    """Chain two cell tensors (bond_in, cell, bond_out): ``inner`` follows ``outer``."""
    t = np.einsum("bcg,gdh->bcdh", outer, inner)
    return t.reshape(2, -1, 2)


def g0_isometry(theta: float, m: int = 1) -> Isometry:
    """Single-cell isometry |b> -> |psi0(b)>, or its ``m``-fold composition."""
    theta = check_theta(theta)
    if m < 1:
        raise ValueError("m must be at least 1")
    g = np.stack([_psi0_array(b, theta) for b in (0, 1)]).reshape(2, 9, 2)
    t = g
    for _ in range(m - 1):
        t = compose(t, g)
    return Isometry(t.reshape(2, -1).T, m, "g0")


def contract_chain(cells: Sequence[np.ndarray]) -> np.ndarray:
    """Amplitudes of the state obtained by feeding a Bell seed through ``cells`` in order.

    Each entry is a (bond_in, cell, bond_out) tensor. The returned vector is
    laid out as (left cap, cell_0, cell_1, ..., right cap).
    """
    st = np.eye(2) / np.sqrt(2)  # (left cap, bond)
    for t in cells:
        st = np.einsum("pb,bcg->pcg", st, t).reshape(-1, 2)
    return st.reshape(-1)


def assemble_ground_state(params: ModelParams) -> StateVector:
    """Explicit ground state on the full chain (refused beyond ``MAX_ASSEMBLY_ELL``)."""
    if params.ell > MAX_ASSEMBLY_ELL:
        raise StateTooLargeError(
            f"ell={params.ell} needs {4 * 9 ** params.ell} amplitudes; use cap_density_matrix "
            "or bell_fidelity for long chains")
    g = g0_isometry(params.theta).tensor()
    return StateVector(params.shape, contract_chain([g] * params.ell))


def single_fidelity(theta: float) -> float:
    """Bell weight kept per cell: sin^2 / (4 cos^2 + sin^2)."""
    theta = check_theta(theta)
    s2, c2 = np.sin(theta) ** 2, np.cos(theta) ** 2
    return float(s2 / (4 * c2 + s2))


def infidelity(theta: float) -> float:
    """1 - f(theta), computed without cancellation near pi/2."""
    theta = check_theta(theta)
    s2, c2 = np.sin(theta) ** 2, np.cos(theta) ** 2
    return float(4 * c2 / (4 * c2 + s2))


def _as_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def depolarize_step(rho, theta: float) -> DensityMatrix:
    """One cell of the bond channel: (sin^2 rho + 4 cos^2 Tr(rho) I/2) / (4 cos^2 + sin^2)."""
    theta = check_theta(theta)
    r = _as_matrix(rho)
    if r.shape != (2, 2):
        raise ValueError("depolarize_step acts on a single qubit")
    s2, c2 = np.sin(theta) ** 2, np.cos(theta) ** 2
    out = (s2 * r + 4 * c2 * np.trace(r) * np.eye(2) / 2) / (4 * c2 + s2)
    return DensityMatrix(ChainShape((2,)), out)


def isometry_channel(rho, iso: Isometry) -> np.ndarray:
    """Tr_cell[g rho g^dagger]: the bond map induced by a cell isometry, by direct contraction."""
    r = _as_matrix(rho)
    t = iso.tensor()  # (in, cell, out)
    return np.einsum("acg,ab,bch->gh", t, r, t.conj())


def cap_density_matrix(params: ModelParams) -> DensityMatrix:
    """Reduced state of the two cap qubits: F |Phi+><Phi+| + (1 - F) I/4 with F = f^ell."""
    w = single_fidelity(params.theta) ** params.ell
    phi = bell_vector(2, 2)
    rho = w * np.outer(phi, phi) + (1 - w) * np.eye(4) / 4
    return DensityMatrix(ChainShape((2, 2)), rho)


def bell_fidelity(theta: float, ell: int) -> FidelityRecord:
    if ell < 1:
        raise ValueError("ell must be at least 1")
    f = single_fidelity(theta)
    w = f ** ell
    return FidelityRecord(float(theta), int(ell), f, w, w + (1 - w) / 4)


def fidelity_sweep(thetas, ells) -> list[FidelityRecord]:
    return [bell_fidelity(t, l) for t in thetas for l in ells]
