"""Lowest eigenpairs of Hermitian operators.

Small problems go to LAPACK; larger ones to a thick-restarted block Krylov
(Lanczos) iteration with full reorthogonalization. Orthogonality constraints
are imposed by projecting every Krylov vector onto the complement of the
forbidden span.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, aslinearoperator

logger = logging.getLogger(__name__)

__all__ = [
    "SpectrumResult",
    "ConvergenceError",
    "lowest_k",
    "lowest_k_constrained",
    "lowest_k_penalty",
    "find_clusters",
    "DENSE_LIMIT",
]

#: Dimension up to which the dense solver is used.
DENSE_LIMIT = 3000


class ConvergenceError(RuntimeError):
    """Raised when the iterative solver exhausts its budget.

    The best available (unconverged) result is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


def find_clusters(eigenvalues, abs_tol: float = 1e-12, rel_tol: float = 1e-3) -> list[list[int]]:
    """Group ascending eigenvalues into degenerate levels.

    Neighbours join a level when their spacing is at most
    ``max(abs_tol, rel_tol * spacing to the next eigenvalue)``. The last
    eigenvalue has no known successor, so only ``abs_tol`` applies to it.
    """
    vals = np.asarray(eigenvalues, dtype=float)
    if vals.size == 0:
        return []
    clusters = [[0]]
    for i in range(1, vals.size):
        d = vals[i] - vals[i - 1]
        nxt = vals[i + 1] - vals[i] if i + 1 < vals.size else 0.0
        if d <= max(abs_tol, rel_tol * nxt):
            clusters[-1].append(i)
        else:
            clusters.append([i])
    return clusters


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = field(repr=False)
    residual_norms: np.ndarray
    converged: bool
    method: str = "dense"
    iterations: int = 0
    matvecs: int = 0

    def clusters(self, abs_tol: float = 1e-12, rel_tol: float = 1e-3) -> list[list[int]]:
        return find_clusters(self.eigenvalues, abs_tol, rel_tol)

    def levels(self, abs_tol: float = 1e-12, rel_tol: float = 1e-3) -> list[tuple[float, int]]:
        """(mean energy, degeneracy) per level; the last level may be truncated by k."""
        return [(float(np.mean(self.eigenvalues[c])), len(c)) for c in self.clusters(abs_tol, rel_tol)]


# --------------------------------------------------------------------------
# operator adaptation


def _as_linop(op) -> LinearOperator:
    if hasattr(op, "as_linear_operator"):
        return op.as_linear_operator()
    return aslinearoperator(op)


def _materialize(op) -> np.ndarray:
    if isinstance(op, np.ndarray):
        return op
    if sp.issparse(op):
        return op.toarray()
    if hasattr(op, "to_dense"):
        return op.to_dense()
    lin = _as_linop(op)
    n = lin.shape[0]
    return lin.matmat(np.eye(n, dtype=lin.dtype if lin.dtype is not None else float))


def _op_norm_estimate(lin: LinearOperator, rng, steps: int = 30) -> float:
    n = lin.shape[0]
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(steps):
        w = lin.matvec(v)
        est = np.linalg.norm(w)
        if est == 0:
            return 0.0
        v = w / est
    return float(est)


def _orthonormal_complement_basis(forbidden: np.ndarray, n: int) -> np.ndarray:
    q, _ = np.linalg.qr(forbidden, mode="complete")
    return q[:, forbidden.shape[1]:]


def _check_forbidden(forbidden, n):
    if forbidden is None:
        return np.zeros((n, 0))
    F = np.asarray(forbidden)
    if F.ndim == 1:
        F = F[:, None]
    if F.shape[0] != n:
        raise ValueError(f"forbidden vectors have length {F.shape[0]}, operator dimension is {n}")
    if F.shape[1]:
        gram = F.conj().T @ F
        if np.abs(gram - np.eye(F.shape[1])).max() > 1e-10:
            raise ValueError("forbidden vectors must be orthonormal")
    return F


def _residuals(lin: LinearOperator, vals, vecs, F) -> np.ndarray:
    if vecs.shape[1] == 0:
        return np.zeros(0)
    av = lin.matmat(vecs)
    if F.shape[1]:
        av = av - F @ (F.conj().T @ av)
    return np.linalg.norm(av - vecs * vals[None, :], axis=0)


# --------------------------------------------------------------------------
# dense path


def _dense(op, k, F) -> tuple[np.ndarray, np.ndarray]:
    A = _materialize(op)
    n = A.shape[0]
    A = 0.5 * (A + A.conj().T)
    if F.shape[1]:
        Z = _orthonormal_complement_basis(F, n)
        A = Z.conj().T @ A @ Z
    vals, y = sla.eigh(A, subset_by_index=[0, k - 1])
    vecs = Z @ y if F.shape[1] else y
    return vals, vecs


# --------------------------------------------------------------------------
# block Krylov path


def _orthogonalize(W, bases, drop_tol=1e-10):
    """Project W against each orthonormal basis (twice) and orthonormalize it."""
    norms0 = np.linalg.norm(W, axis=0)
    for _ in range(2):
        for Q in bases:
            if Q.shape[1]:
                W = W - Q @ (Q.conj().T @ W)
    keep = np.linalg.norm(W, axis=0) > drop_tol * np.maximum(norms0, 1e-300)
    W = W[:, keep]
    if W.shape[1] == 0:
        return W
    u, s, _ = np.linalg.svd(W, full_matrices=False)
    good = s > drop_tol * s.max()
    W = u[:, good]
    # a final pass keeps the basis orthonormal to working precision
    for Q in bases:
        if Q.shape[1]:
            W = W - Q @ (Q.conj().T @ W)
    q, _ = np.linalg.qr(W)
    return q


def _block_krylov(lin, n, k, tol, F, block_size, max_basis, max_restarts, rng):
    dtype = np.result_type(lin.dtype if lin.dtype is not None else float, F.dtype)
    n_eff = n - F.shape[1]
    b = min(block_size, n_eff)
    max_basis = min(max(max_basis, k + 2 * b), n_eff)
    keep = min(max(k + b, 2 * k), max_basis - b) if max_basis > k + b else k

    V = _orthogonalize(rng.standard_normal((n, b)).astype(dtype), [F])
    AV = lin.matmat(V)
    matvecs = V.shape[1]
    new = V
    iterations = 0
    restarts = 0
    exhausted = False
    vals = vecs = res = None
    while True:
        iterations += 1
        # expand
        if V.shape[1] < max_basis and not exhausted:
            W = lin.matmat(new) if new is not V else AV[:, -new.shape[1]:]
            W = _orthogonalize(W, [F, V])
            if W.shape[1] == 0:
                exhausted = True
            else:
                W = W[:, : max_basis - V.shape[1]]
                AW = lin.matmat(W)
                matvecs += W.shape[1]
                V = np.hstack([V, W])
                AV = np.hstack([AV, AW])
                new = W
        full = V.shape[1] >= n_eff or exhausted
        if V.shape[1] >= max_basis or full or iterations % 4 == 0:
            proj = AV - F @ (F.conj().T @ AV) if F.shape[1] else AV
            Hm = V.conj().T @ proj
            Hm = 0.5 * (Hm + Hm.conj().T)
            theta, Y = np.linalg.eigh(Hm)
            kk = min(k, theta.size)
            vals = theta[:kk]
            vecs = V @ Y[:, :kk]
            R = proj @ Y[:, :kk] - vecs * vals[None, :]
            res = np.linalg.norm(R, axis=0)
            if kk == k and np.all(res <= tol):
                return vals, vecs, res, True, iterations, matvecs
            if full:
                # invariant subspace: Ritz pairs are exact up to rounding
                return vals, vecs, res, bool(np.all(res <= tol)) and kk == k, iterations, matvecs
            if V.shape[1] >= max_basis:
                if restarts >= max_restarts:
                    return vals, vecs, res, False, iterations, matvecs
                restarts += 1
                nkeep = min(keep, theta.size)
                V = V @ Y[:, :nkeep]
                AV = AV @ Y[:, :nkeep]
                # residual block of the wanted pairs continues the Krylov sequence
                Rk = proj @ Y[:, :nkeep] - (V * theta[None, :nkeep])
                new = _orthogonalize(Rk[:, :b], [F, V])
                if new.shape[1] == 0:
                    exhausted = True
                    continue
                AN = lin.matmat(new)
                matvecs += new.shape[1]
                V = np.hstack([V, new])
                AV = np.hstack([AV, AN])
                logger.debug("restart %d: lowest ritz %s, residuals %s", restarts, vals, res)


def lowest_k(op, k: int, tol: float = 1e-10, *, method: str = "auto", dense_limit: int = DENSE_LIMIT,
             block_size: int | None = None, max_basis: int | None = None, max_restarts: int = 200,
             seed: int = 0, forbidden=None) -> SpectrumResult:
    """The ``k`` lowest eigenpairs of a Hermitian operator.

    ``op`` may be a dense array, a scipy sparse matrix, a ``LinearOperator`` or
    anything with ``as_linear_operator()`` (e.g. ``ChainOperator``).
    ``method`` is ``"auto"``, ``"dense"`` or ``"krylov"``; auto picks dense at
    or below ``dense_limit``. Raises ``ConvergenceError`` when the Krylov
    iteration does not reach ``tol`` on every residual.
    """
    lin = _as_linop(op)
    n = lin.shape[0]
    if lin.shape[0] != lin.shape[1]:
        raise ValueError("operator must be square")
    if tol <= 0:
        raise ValueError("tol must be positive")
    F = _check_forbidden(forbidden, n)
    n_eff = n - F.shape[1]
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > n_eff:
        raise ValueError(f"k={k} exceeds the available dimension {n_eff}")
    if method == "auto":
        method = "dense" if n <= dense_limit else "krylov"
    if method == "dense":
        vals, vecs = _dense(op, k, F)
        res = _residuals(lin, vals, vecs, F)
        return SpectrumResult(vals, vecs, res, bool(np.all(res <= tol)), "dense", 1, n)
    if method != "krylov":
        raise ValueError(f"unknown method {method!r}")
    rng = np.random.default_rng(seed)
    b = block_size or max(k, 4)
    mb = max_basis or max(8 * k, 160)
    vals, vecs, res, ok, its, mv = _block_krylov(lin, n, k, tol, F, b, mb, max_restarts, rng)
    result = SpectrumResult(vals, vecs, res, ok, "krylov", its, mv)
    if not ok:
        raise ConvergenceError(
            f"block Krylov did not converge: max residual {np.max(res):.3e} > tol {tol:.1e} "
            f"after {its} iterations", result)
    return result


def lowest_k_constrained(op, k: int, tol: float, forbidden, **kwargs) -> SpectrumResult:
    """Lowest eigenpairs of ``op`` restricted to the complement of ``span(forbidden)``.

    ``forbidden`` holds orthonormal column vectors. Returned eigenvectors are
    orthogonal to every one of them.
    """
    return lowest_k(op, k, tol, forbidden=forbidden, **kwargs)


def lowest_k_penalty(op, k: int, forbidden, kappa: float, tol: float = 1e-10, **kwargs) -> SpectrumResult:
    """Lowest eigenpairs of ``op + kappa * sum_v |v><v|``; the finite-multiplier variant."""
    F = np.asarray(forbidden)
    if F.ndim == 1:
        F = F[:, None]
    lin = _as_linop(op)
    n = lin.shape[0]
    if isinstance(op, np.ndarray) or sp.issparse(op):
        A = _materialize(op) + kappa * (F @ F.conj().T)
        return lowest_k(A, k, tol, **kwargs)

    def mv(x):
        return lin.matmat(x) + kappa * (F @ (F.conj().T @ x))

    shifted = LinearOperator((n, n), matvec=mv, matmat=mv, dtype=np.result_type(lin.dtype, F.dtype))
    return lowest_k(shifted, k, tol, **kwargs)
