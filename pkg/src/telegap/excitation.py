"""Single-excitation variational treatment of the infinite chain.

One unit cell of ``m`` qutrit pairs carries an excitation isometry
``|b> -> |psi_f(b)>`` while every other cell keeps the ground-state isometry.
With ``psi_f(b)`` orthogonal to both ground-state columns, excitations at
different cells are orthogonal and the energy functional reduces to a
quadratic form ``x^T M x`` on the pair ``x = (psi_f(0), psi_f(1))``:

    M = D + cos(phi) (T + T^T)

``D`` gathers the terms inside the excited cell plus the two terms shared
with its neighbours (contracted through the ground-state isometry), and ``T``
is the amplitude for the excitation to hop one cell. Physical states obey
<Phi|Phi> = x.x / 2 and <Phi|H|Phi> = x^T M x / 2, so the lowest Rayleigh
quotient of the chain is lowest eig(M) and the reported level is half of it.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator

from .eigensolve import ConvergenceError, SpectrumResult, find_clusters, lowest_k, lowest_k_penalty
from .ground_state import g0_isometry, infidelity, single_fidelity
from .model import IDLE, build_create_pair, build_projection, check_epsilon, check_theta
from .output import csv_text, plot_text
from .sectors import restricted_matrix, sectors
from .tensor import ChainOperator, ChainShape, LocalTerm

logger = logging.getLogger(__name__)

__all__ = [
    "ExcitationVector",
    "EffectiveOperator",
    "BlockOperator",
    "VariationalResult",
    "SweepTable",
    "constraint_basis",
    "closed_form_blocks",
    "effective_apply",
    "variational_gap",
    "unit_cell_scan",
    "embedding_violations",
    "theta_sweep",
    "theta_for_infidelity",
    "gap_law",
    "appendix_states",
    "appendix_overlap",
    "ChainEmbedding",
]

CONSTRAINT_ATOL = 1e-12
INPUT_CONSTRAINT_ATOL = 1e-10
DEFAULT_TOL = 1e-14


def excitation_shape(m: int) -> ChainShape:
    """(bond_in, 2m qutrits, bond_out) layout of a pair vector."""
    if m < 1:
        raise ValueError("unit cell size m must be at least 1")
    return ChainShape((2,) + (3,) * (2 * m) + (2,))


def pair_dim(m: int) -> int:
    return 4 * 9 ** m


def _check_phi(phi: float) -> float:
    phi = float(phi)
    if not np.isfinite(phi) or phi < 0 or phi > np.pi:
        raise ValueError(f"phi must lie in [0, pi], got {phi!r}")
    return phi


def constraint_basis(theta: float, m: int = 1) -> np.ndarray:
    """Orthonormal (4 * 9**m, 4) columns: ground-state column ``b'`` placed in slot ``b``."""
    g = g0_isometry(theta, m).tensor()  # (b', cell, out)
    cols = []
    for b, bp in product((0, 1), repeat=2):
        v = np.zeros((2, 9 ** m, 2))
        v[b] = g[bp]
        cols.append(v.reshape(-1))
    return np.stack(cols, axis=1)


def _project_out(C: np.ndarray, v: np.ndarray) -> np.ndarray:
    return v - C @ (C.T @ v)


@dataclass(frozen=True)
class ExcitationVector:
    """Excitation isometry columns (psi_f(0), psi_f(1)) with total squared norm 2."""

    m: int
    pair: np.ndarray = field(repr=False)  # (2, 2 * 9**m)
    theta: float | None = None

    def __post_init__(self):
        p = np.array(self.pair, dtype=float, copy=True).reshape(2, 2 * 9 ** self.m)
        nrm2 = float(np.sum(p * p))
        if abs(nrm2 - 2.0) > 1e-10:
            raise ValueError(f"pair squared norm is {nrm2!r}, expected 2")
        if self.theta is not None:
            viol = np.abs(constraint_basis(self.theta, self.m).T @ p.reshape(-1)).max()
            if viol > CONSTRAINT_ATOL:
                raise ValueError(f"pair overlaps the ground-state columns by {viol:.2e}")
        p.setflags(write=False)
        object.__setattr__(self, "pair", p)

    @classmethod
    def from_flat(cls, x: np.ndarray, m: int, theta: float | None = None) -> "ExcitationVector":
        x = np.asarray(x, dtype=float).reshape(-1)
        return cls(m, np.sqrt(2.0) * x / np.linalg.norm(x), theta)

    @property
    def flat(self) -> np.ndarray:
        return self.pair.reshape(-1)

    def column(self, b: int) -> np.ndarray:
        """psi_f(b) on (3, 3) * m + (2,)."""
        return self.pair[b]

    def isometry_tensor(self) -> np.ndarray:
        return self.pair.reshape(2, 9 ** self.m, 2)


# --------------------------------------------------------------------------
# the effective operator


class EffectiveOperator:
    """Quadratic form of the single-excitation energy for a cell of ``m`` qutrit pairs.

    The position-diagonal part is a ChainOperator on the pair layout
    ``[2, 3, ..., 3, 2]``; the hopping part is applied by direct contraction
    with the composed ground-state isometry (never materialized unless asked).
    """

    def __init__(self, m: int, theta: float, phi: float = 0.0, epsilon: float = 1.0):
        self.m = int(m)
        self.theta = check_theta(theta)
        self.phi = _check_phi(phi)
        self.epsilon = check_epsilon(epsilon)
        self.shape = excitation_shape(self.m)
        self.dim = self.shape.total_dim
        self._cell = g0_isometry(self.theta).tensor().reshape(2, 3, 3, 2)
        gm = g0_isometry(self.theta, self.m).tensor()
        self._K = 9 ** self.m // 3
        self._gm_tail = gm.reshape(2, self._K, 3, 2)  # (in, rest, last qutrit, out)
        self._gm_head = gm.reshape(2, 3, self._K, 2)  # (in, first qutrit, rest, out)
        self._create = build_create_pair(self.epsilon, 3, 3).block.reshape(3, 3, 3, 3)
        self.diagonal = ChainOperator(self.shape, self._diagonal_terms())
        self.constraints = constraint_basis(self.theta, self.m)

    def __repr__(self):
        return f"EffectiveOperator(m={self.m}, theta={self.theta!r}, phi={self.phi!r})"

    # ---- position-diagonal part

    def left_shared_block(self) -> np.ndarray:
        """Pair creation between the previous ground-state cell and the first qutrit, on (bond_in, q1)."""
        g, c = self._cell, self._create
        return np.einsum("apsB,stSu,apSb->Btbu", g, c, g).reshape(6, 6)

    def right_shared_block(self) -> np.ndarray:
        """Pair creation between the last qutrit and the next ground-state cell, on (q_last, bond_out)."""
        g, c = self._cell, self._create
        return np.einsum("BuQo,suSv,bvQo->sBSb", g, c, g).reshape(6, 6)

    def _diagonal_terms(self) -> list[LocalTerm]:
        m, eps = self.m, self.epsilon
        terms = [LocalTerm(0, (2, 3), self.left_shared_block(), "left_shared")]
        proj = build_projection(self.theta, eps)
        for k in range(m):
            terms.append(proj.at(1 + 2 * k))
            if k < m - 1:
                terms.append(build_create_pair(eps, 3, 3, 2 + 2 * k))
        terms.append(LocalTerm(2 * m, (3, 2), self.right_shared_block(), "right_shared"))
        return terms

    # ---- hopping part

    def hop(self, y: np.ndarray) -> np.ndarray:
        """T y: amplitude at a cell given the excitation ``y`` one cell to its right."""
        batch = y.shape[1:]
        K = self._K
        y4 = y.reshape((2, 3, K, 2) + batch)
        w = np.einsum("gund...,GUnd->guUG...", y4, self._gm_head)
        z = np.einsum("sUSu,guUG...->gSsG...", self._create, w)
        out = np.einsum("brSg,gSsG...->brsG...", self._gm_tail, z)
        return out.reshape((self.dim,) + batch)

    def hop_adjoint(self, x: np.ndarray) -> np.ndarray:
        """T^T x."""
        batch = x.shape[1:]
        K = self._K
        x4 = x.reshape((2, K, 3, 2) + batch)
        z = np.einsum("brSg,brsG...->gSsG...", self._gm_tail, x4)
        w = np.einsum("sUSu,gSsG...->guUG...", self._create, z)
        out = np.einsum("guUG...,GUnd->gund...", w, self._gm_head)
        return out.reshape((self.dim,) + batch)

    def hop_factors(self) -> tuple[np.ndarray, np.ndarray]:
        """(U, V) with T = U V^T; the rank is at most 36."""
        K, n = self._K, self.dim
        U = np.zeros((2, K, 3, 2, 2, 3, 3, 2))
        V = np.zeros((2, 3, K, 2, 2, 3, 3, 2))
        for g, u, Uq, G in product(range(2), range(3), range(3), range(2)):
            V[g, u, :, :, g, u, Uq, G] = self._gm_head[G, Uq]
            U[:, :, :, G, g, u, Uq, G] = np.einsum("brS,sS->brs", self._gm_tail[:, :, :, g],
                                                   self._create[:, Uq, :, u])
        return U.reshape(n, -1), V.reshape(n, -1)

    # ---- full operator

    def apply(self, x: np.ndarray, *, threads: int = 1, deterministic: bool = True) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = self.diagonal.apply(x, threads=threads, deterministic=deterministic)
        c = np.cos(self.phi)
        if c != 0.0:
            out = out + c * (self.hop(x) + self.hop_adjoint(x))
        return out

    def matrix(self) -> np.ndarray:
        """Dense operator; intended for m <= 3."""
        M = self.diagonal.to_dense()
        c = np.cos(self.phi)
        if c != 0.0:
            U, V = self.hop_factors()
            T = U @ V.T
            M = M + c * (T + T.T)
        return M

    def as_linear_operator(self, *, threads: int = 1, deterministic: bool = True) -> LinearOperator:
        def mv(v):
            return self.apply(v, threads=threads, deterministic=deterministic)

        return LinearOperator((self.dim, self.dim), matvec=mv, matmat=mv, rmatvec=mv, dtype=float)

    def projected_apply(self, x: np.ndarray, **kwargs) -> np.ndarray:
        """P M P x with P the projector off the ground-state columns."""
        C = self.constraints
        return _project_out(C, self.apply(_project_out(C, x), **kwargs))

    def sector_matrix(self, indices: np.ndarray, factors=None) -> np.ndarray:
        """Dense block of M on one symmetry sector."""
        sub = restricted_matrix(self.diagonal, indices)
        c = np.cos(self.phi)
        if c != 0.0:
            U, V = self.hop_factors() if factors is None else factors
            t = U[indices] @ V[indices].T
            sub = sub + c * (t + t.T)
        return sub


def effective_apply(x, theta: float, phi: float = 0.0, m: int | None = None, *,
                    epsilon: float = 1.0, threads: int = 1, deterministic: bool = True) -> np.ndarray:
    """Apply the constrained effective operator M to a pair vector.

    ``x`` is an ExcitationVector or a flat array of length ``4 * 9**m``. Inputs
    overlapping the ground-state columns by more than 1e-10 (relative) are
    rejected; the output is projected back onto the constrained space.
    """
    if isinstance(x, ExcitationVector):
        m, vec = x.m, x.flat
    else:
        vec = np.asarray(x, dtype=float)
        if m is None:
            m = int(round(np.log(vec.shape[0] / 4) / np.log(9)))
        if vec.shape[0] != pair_dim(m):
            raise ValueError(f"vector of length {vec.shape[0]} does not fit a cell of size m={m}")
    op = EffectiveOperator(m, theta, phi, epsilon)
    C = op.constraints
    scale = max(float(np.linalg.norm(vec)), 1e-300)
    viol = float(np.abs(C.T @ vec).max()) / scale
    if viol > INPUT_CONSTRAINT_ATOL:
        raise ValueError(f"input overlaps the ground-state columns by {viol:.2e} (> {INPUT_CONSTRAINT_ATOL:g})")
    return _project_out(C, op.apply(vec, threads=threads, deterministic=deterministic))


# --------------------------------------------------------------------------
# closed-form single-cell blocks


def _unit(d, i, j):
    a = np.zeros((d, d))
    a[i, j] = 1.0
    return a


def _kron(*ops):
    out = np.array([[1.0]])
    for o in ops:
        out = np.kron(out, o)
    return out


@dataclass(frozen=True)
class BlockOperator:
    """Explicit 2 x 2 arrangement of 18 x 18 blocks acting on (psi_f(0), psi_f(1))."""

    theta: float
    phi: float
    blocks: dict = field(repr=False)

    @property
    def matrix(self) -> np.ndarray:
        b = self.blocks
        return np.block([[b["00"], b["01"]], [b["10"], b["11"]]])

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x


def _relabel_01(block: np.ndarray) -> np.ndarray:
    """Swap |0> and |1> on every factor of a (3, 3, 2) space."""
    idx = np.arange(18).reshape(3, 3, 2)
    p3, p2 = np.array([1, 0, 2]), np.array([1, 0])
    perm = idx[p3][:, p3][:, :, p2].reshape(-1)
    return block[np.ix_(perm, perm)]


def closed_form_blocks(theta: float, phi: float = 0.0, *, kappa: float = 0.0, epsilon: float = 1.0,
                       negated_last_hop: bool = False) -> BlockOperator:
    """Hand-derived m = 1 effective operator built from explicit outer products.

    The off-diagonal block carries a minus sign on its last hopping line when
    ``negated_last_hop`` is set; that variant is not symmetric and is kept only for
    comparison. ``kappa`` adds the finite-multiplier penalty on the ground
    columns to both diagonal blocks.
    """
    theta = check_theta(theta)
    phi = _check_phi(phi)
    eps = check_epsilon(epsilon)
    p = infidelity(theta)
    c = np.cos(phi)
    o3 = lambda i, j: _unit(3, i, j)  # noqa: E731
    o2 = lambda i, j: _unit(2, i, j)  # noqa: E731
    I3, I2 = np.eye(3), np.eye(2)
    proj = build_projection(theta, 1.0).block
    create = build_create_pair(1.0, 3, 2).block

    # the two "dephased" hopping pieces that recur in both blocks
    d_a = (_kron(o3(0, 0), o2(0, 0)) + _kron(o3(0, 1), o2(0, 1))
           - _kron(o3(1, 0), o2(1, 0)) - _kron(o3(1, 1), o2(1, 1))) / 4
    d_b = (_kron(o3(0, 0), o2(0, 0)) + _kron(o3(1, 0), o2(1, 0))
           - _kron(o3(0, 1), o2(0, 1)) - _kron(o3(1, 1), o2(1, 1))) / 4

    h00 = np.kron(proj, I2) + p * (
        np.kron(I3, create) + _kron((o3(0, 0) + 2 * o3(1, 1)) / 2, I3, I2)
        + c * (_kron(o3(0, 1), (_kron(o3(0, 0), o2(1, 0)) + _kron(o3(0, 1), o2(1, 1))) / 2)
               + _kron(o3(1, 0), (_kron(o3(0, 0), o2(0, 1)) + _kron(o3(1, 0), o2(1, 1))) / 2)
               + _kron(o3(0, 0), d_a) + _kron(o3(0, 0), d_b)))
    last_sign = -1.0 if negated_last_hop else 1.0
    h01 = p * (
        -_kron(o3(0, 1), I3, I2) / 2
        + c * (_kron(o3(0, 0), (_kron(o3(1, 0), o2(0, 0)) + _kron(o3(1, 1), o2(0, 1))) / 2)
               + _kron(o3(1, 1), (_kron(o3(0, 0), o2(0, 1)) + _kron(o3(1, 0), o2(1, 1))) / 2)
               - _kron(o3(0, 1), d_a) + last_sign * _kron(o3(0, 1), d_b)))
    if kappa:
        g = g0_isometry(theta).columns
        h00 = h00 + (kappa / eps) * (g @ g.T)
    blocks = {"00": eps * h00, "01": eps * h01, "10": eps * _relabel_01(h01), "11": eps * _relabel_01(h00)}
    return BlockOperator(theta, phi, blocks)


# --------------------------------------------------------------------------
# variational gaps


@dataclass
class VariationalResult:
    m: int
    theta: float
    phi: float
    gap: float
    degeneracy: int
    eigenvectors: tuple = field(repr=False)
    diagnostics: dict = field(default_factory=dict, repr=False)

    @property
    def rayleigh_energy(self) -> float:
        """Energy of the normalized variational chain state, 2 * gap."""
        return 2.0 * self.gap

    @property
    def f_theta(self) -> float:
        return single_fidelity(self.theta)


def _solve_dense(op: EffectiveOperator, k: int):
    M = op.matrix()
    sol = lowest_k(M, k, 1.0, method="dense", forbidden=op.constraints)
    return sol.eigenvalues, sol.eigenvectors, M.shape[0] - 4


def _solve_sectors(op: EffectiveOperator, k: int, dense_limit: int = 6000):
    """Diagonalize M sector by sector; mismatched sectors sit at or above r * epsilon."""
    n = op.dim
    C = op.constraints
    factors = op.hop_factors()
    by_r: dict[int, list] = {}
    for s in sectors(op.shape):
        by_r.setdefault(s.n_mismatched, []).append(s)
    vals, cols, cdim = [], [], 0
    for r in sorted(by_r):
        if r > 0 and len(vals) >= k and np.sort(vals)[k - 1] < r * op.epsilon * (1 - 1e-12):
            break
        for s in by_r[r]:
            if s.dim > dense_limit:
                raise ConvergenceError(f"sector of dimension {s.dim} exceeds the dense limit {dense_limit}")
            sub = op.sector_matrix(s.indices, factors)
            u, sv, _ = np.linalg.svd(C[s.indices], full_matrices=True)
            rank = int(np.sum(sv > 1e-10))
            Z = u[:, rank:]
            cdim += Z.shape[1]
            if Z.shape[1] == 0:
                continue
            kk = min(k, Z.shape[1])
            w, y = sla.eigh(Z.T @ sub @ Z, subset_by_index=[0, kk - 1])
            v = Z @ y
            for j in range(kk):
                full = np.zeros(n)
                full[s.indices] = v[:, j]
                vals.append(w[j])
                cols.append(full)
    order = np.argsort(vals, kind="stable")[:k]
    return np.asarray(vals)[order], np.stack([cols[i] for i in order], axis=1), cdim


def _solve_krylov(op: EffectiveOperator, k: int, tol: float, seed: int = 0, threads: int = 1):
    lin = op.as_linear_operator(threads=threads)
    sol = lowest_k(lin, k, tol, method="krylov", forbidden=op.constraints, seed=seed,
                   block_size=max(k, 6), max_basis=max(12 * k, 240), max_restarts=2000)
    return sol.eigenvalues, sol.eigenvectors, op.dim - 4


def variational_gap(m: int, theta: float, phi: float = 0.0, *, epsilon: float = 1.0, method: str = "auto",
                    k: int = 4, tol: float = DEFAULT_TOL, kappa: float | None = None,
                    threads: int = 1, seed: int = 0) -> VariationalResult:
    """Lowest constrained level of M/2 for a cell of ``m`` qutrit pairs.

    ``method``: ``"dense"`` (whole matrix, m <= 3), ``"sectors"`` (symmetry
    blocks, any m up to 5), ``"krylov"`` (matrix-free, deflated) or ``"auto"``
    (dense for m <= 3, sectors beyond). With ``kappa`` set, the finite
    multiplier penalty replaces the projection (dense only) and the residual
    bound is relaxed to ``max(tol, 1e-15 * kappa)``.
    ``tol`` bounds every residual ||P M v - lambda v|| / 2 of the lowest level.
    """
    if m < 1 or m > 6:
        raise ValueError(f"unit cell size m={m} outside 1..6")
    if k < 1:
        raise ValueError("k must be at least 1")
    op = EffectiveOperator(m, theta, phi, epsilon)
    C = op.constraints
    if method == "auto":
        method = "dense" if m <= 3 else "sectors"
    if kappa is not None:
        sol = lowest_k_penalty(op.matrix(), k, C, kappa, method="dense")
        vals, vecs, cdim = sol.eigenvalues, sol.eigenvectors, op.dim
    elif method == "dense":
        vals, vecs, cdim = _solve_dense(op, k)
    elif method == "sectors":
        vals, vecs, cdim = _solve_sectors(op, k)
    elif method == "krylov":
        vals, vecs, cdim = _solve_krylov(op, k, 2 * tol, seed, threads)
    else:
        raise ValueError(f"unknown method {method!r}")

    if kappa is None:
        mv = op.projected_apply(vecs)
        viol = float(np.abs(C.T @ vecs).max())
    else:
        mv = op.apply(vecs) + kappa * (C @ (C.T @ vecs))
        viol = float(np.abs(C.T @ vecs).max())
    res = 0.5 * np.linalg.norm(mv - vecs * vals[None, :], axis=0)
    half = 0.5 * vals
    clusters = find_clusters(half / op.epsilon)
    lowest = clusters[0]
    gap = float(half[lowest].mean())
    diag = {
        "method": method if kappa is None else "penalty",
        "levels": half.copy(),
        "residuals": res,
        "constraint_violation": viol,
        "constrained_dim": op.dim - 4,
        "searched_dim": cdim,
        "next_level": float(half[clusters[1][0]]) if len(clusters) > 1 else float("nan"),
        "spread": float(half[lowest].max() - half[lowest].min()),
    }
    trip = tuple(ExcitationVector.from_flat(vecs[:, i], m) for i in lowest)
    result = VariationalResult(int(m), float(theta), float(phi), gap, len(lowest), trip, diag)
    # the penalty shifts the operator norm to ~kappa, and rounding scales with it
    tol_eff = tol * max(1.0, op.epsilon) if kappa is None else max(tol, 1e-15 * abs(kappa))
    bad = res[lowest].max() > tol_eff
    if bad:
        raise ConvergenceError(
            f"variational residual {res[lowest].max():.3e} exceeds the required {tol:.1e}", result)
    # near theta = pi/2 the level drops below rounding; only a clearly negative value is an error
    if gap < -tol_eff:
        raise ConvergenceError(f"negative variational level {gap!r}", result)
    diag["resolved"] = bool(gap > tol_eff)
    return result


def unit_cell_scan(theta: float, m_range: Sequence[int], *, phi: float = 0.0, epsilon: float = 1.0,
                   threads: int = 1, **kwargs) -> list[VariationalResult]:
    ms = list(m_range)

    def one(m):
        return variational_gap(m, theta, phi, epsilon=epsilon, **kwargs)

    if threads > 1 and len(ms) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, ms))
    return [one(m) for m in ms]


def embedding_violations(results: Sequence[VariationalResult], atol: float = 1e-13) -> list[tuple[int, int]]:
    """Pairs (m, m') with m dividing m' where the larger cell does worse than the smaller one."""
    by_m = {r.m: r.gap for r in results}
    return [(a, b) for a in by_m for b in by_m
            if b > a and b % a == 0 and by_m[b] > by_m[a] + atol]


# --------------------------------------------------------------------------
# fidelity sweep


def gap_law(theta: float, epsilon: float = 1.0) -> float:
    """(1/8) (1 - f)**3 in energy units."""
    return epsilon * infidelity(theta) ** 3 / 8


def theta_for_infidelity(one_minus_f: float) -> float:
    """Angle at which 1 - f(theta) takes the given value."""
    q = float(one_minus_f)
    if not 0 < q <= 1:
        raise ValueError("1 - f must lie in (0, 1]")
    return float(np.arctan(2 * np.sqrt((1 - q) / q)))


@dataclass
class SweepTable:
    results: list[VariationalResult]
    epsilon: float = 1.0

    @property
    def ratios(self) -> np.ndarray:
        return np.array([r.gap / gap_law(r.theta, self.epsilon) for r in self.results])

    def to_csv(self) -> str:
        e = self.epsilon
        rows = [(r.m, r.theta, r.phi, r.f_theta, r.gap / e, r.degeneracy, q)
                for r, q in zip(self.results, self.ratios)]
        thetas = sorted({r.theta for r in self.results})
        return csv_text(["m", "theta", "phi", "f_theta", "gap", "degeneracy", "fit_ratio"], rows,
                        theta=thetas, epsilon=e)

    def plot_vs_f(self, samples: int = 60) -> str:
        """Gap against f for each m, then the (1/8)(1-f)^3 curve."""
        e = self.epsilon
        blocks = []
        for m in sorted({r.m for r in self.results}):
            rs = [r for r in self.results if r.m == m]
            blocks.append(plot_text([[r.f_theta for r in rs], [r.gap / e for r in rs]], ["f", "gap"],
                                    comment=f"m={m}"))
        fs = [r.f_theta for r in self.results]
        q = np.geomspace(1 - max(fs), 1 - min(fs), samples)
        blocks.append(plot_text([1 - q, q ** 3 / 8], ["f", "law"], comment="(1/8)(1-f)^3"))
        return "\n\n".join(blocks)


def theta_sweep(m_list: Sequence[int], theta_grid: Sequence[float], *, phi: float = 0.0,
                epsilon: float = 1.0, threads: int = 1, **kwargs) -> SweepTable:
    for t in theta_grid:
        if not 0 < t < np.pi / 2:
            raise ValueError(f"sweep angles must lie strictly inside (0, pi/2), got {t!r}")
    points = [(m, t) for m in m_list for t in theta_grid]

    def one(pt):
        return variational_gap(pt[0], pt[1], phi, epsilon=epsilon, **kwargs)

    if threads > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, points))
    else:
        results = [one(p) for p in points]
    return SweepTable(results, epsilon)


def cell_plot_data(results: Sequence[VariationalResult], epsilon: float = 1.0) -> str:
    """Gap against m with 1/m and 1/m^2 reference curves anchored at the smallest m."""
    rs = sorted(results, key=lambda r: r.m)
    ms = np.array([r.m for r in rs], dtype=float)
    g = np.array([r.gap for r in rs]) / epsilon
    head = f"theta={rs[0].theta!r} phi={rs[0].phi!r}"
    # one three-column block per reference curve
    return "\n\n".join([
        plot_text([ms, g, g[0] * ms[0] / ms], ["m", "gap", "inv_m"], comment=head + " 1/m"),
        plot_text([ms, g, g[0] * (ms[0] / ms) ** 2], ["m", "gap", "inv_m2"], comment=head + " 1/m^2"),
    ])


# --------------------------------------------------------------------------
# single-flip triplet near theta = pi/2


def appendix_states() -> np.ndarray:
    """The three single-cell flip excitations as (36, 3) columns.

    Column ``k`` stacks (psi_k(0), psi_k(1)) with
    psi_k(b) = (I I P - P I I) |b> (|00> + |11>) / 2 for P = X, XZ, Z.
    """
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    Z = np.diag([1.0, -1.0])
    e3 = lambda P: np.pad(P, ((0, 1), (0, 1)))  # noqa: E731  qubit operator on a qutrit
    cols = []
    for P in (X, X @ Z, Z):
        op = np.kron(np.eye(9), P) - np.kron(np.kron(e3(P), np.eye(3)), np.eye(2))
        pair = []
        for b in (0, 1):
            ket = np.zeros(18)
            for a in (0, 1):
                ket[(b * 3 + a) * 2 + a] = 0.5
            pair.append(op @ ket)
        cols.append(np.concatenate(pair))
    return np.stack(cols, axis=1)


def appendix_overlap(theta: float) -> np.ndarray:
    """Principal overlaps between the m = 1 variational triplet and the flip excitations."""
    theta = check_theta(theta)
    if not 1.5 <= theta < np.pi / 2:
        raise ValueError("the flip forms describe the triplet only for theta in [1.5, pi/2)")
    res = variational_gap(1, theta, 0.0, method="dense")
    trip = np.stack([v.flat for v in res.eigenvectors], axis=1)
    A = appendix_states()
    qa, _ = np.linalg.qr(trip)
    qb, _ = np.linalg.qr(A)
    return np.linalg.svd(qa.T @ qb, compute_uv=False)


# --------------------------------------------------------------------------
# full-chain embedding (independent check of the contractions)


class ChainEmbedding:
    """Embed a single excitation at supercell ``J`` of an explicit finite chain.

    ``state(J, x)`` builds the chain vector with the pair ``x`` replacing the
    ground-state isometry on supercell ``J``; ``adjoint(J, w)`` is its
    transpose, so ``adjoint(J, H @ state(J', y))`` gives the bilinear forms of
    the chain operator between excitation positions.
    """

    def __init__(self, theta: float, m: int, n_cells: int):
        if n_cells < 1:
            raise ValueError("n_cells must be at least 1")
        self.theta, self.m, self.n_cells = check_theta(theta), int(m), int(n_cells)
        self.ell = self.m * self.n_cells
        self._g = g0_isometry(self.theta, self.m).tensor()

    def _left(self, J: int) -> np.ndarray:
        st = np.eye(2) / np.sqrt(2)
        for _ in range(J):
            st = np.einsum("pb,bcg->pcg", st, self._g).reshape(-1, 2)
        return st  # (left amplitudes, bond)

    def _right(self, J: int) -> np.ndarray:
        st = np.eye(2)
        for _ in range(self.n_cells - J - 1):
            st = np.einsum("pb,bcg->pcg", st, self._g).reshape(-1, 2)
        return st.reshape(2, -1)  # (bond, right amplitudes)

    def state(self, J: int, x: np.ndarray) -> np.ndarray:
        x3 = np.asarray(x).reshape(2, 9 ** self.m, 2)
        L, R = self._left(J), self._right(J)
        return np.einsum("Ab,bcd,dB->AcB", L, x3, R).reshape(-1)

    def adjoint(self, J: int, w: np.ndarray) -> np.ndarray:
        L, R = self._left(J), self._right(J)
        w3 = np.asarray(w).reshape(L.shape[0], 9 ** self.m, R.shape[1])
        return np.einsum("Ab,AcB,dB->bcd", L, w3, R).reshape(-1)
