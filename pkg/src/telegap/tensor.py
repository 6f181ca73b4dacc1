"""Qudit-chain tensor algebra.

Amplitudes are laid out row-major over the site dimensions with site 0 the
slowest index, so a vector on ``ChainShape((2, 3, 2))`` reshapes directly to
an array of shape ``(2, 3, 2)``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from math import prod
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

__all__ = [
    "ChainShape",
    "LocalTerm",
    "ChainOperator",
    "StateVector",
    "DensityMatrix",
    "embed_apply",
    "apply_block",
    "partial_trace",
    "inner",
]

HERMITIAN_RTOL = 1e-14


@dataclass(frozen=True)
class ChainShape:
    """Ordered site dimensions of a qudit chain."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise ValueError("ChainShape needs at least one site")
        if any(d < 1 for d in dims):
            raise ValueError(f"site dimensions must be positive, got {dims}")
        object.__setattr__(self, "dims", dims)

    @classmethod
    def chain(cls, ell: int) -> "ChainShape":
        """Shape of the capped chain with ``ell`` qutrit pairs: 2, 3 x 2ell, 2."""
        if ell < 1:
            raise ValueError(f"chain length must be >= 1, got {ell}")
        return cls((2,) + (3,) * (2 * ell) + (2,))

    @property
    def total_dim(self) -> int:
        return prod(self.dims)

    @property
    def n_sites(self) -> int:
        return len(self.dims)

    def __len__(self):
        return len(self.dims)

    def span_dim(self, start: int, stop: int) -> int:
        return prod(self.dims[start:stop])

    def subset(self, sites: Iterable[int]) -> "ChainShape":
        return ChainShape(tuple(self.dims[s] for s in sites))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LocalTerm:
    """A dense Hermitian block acting on a contiguous run of sites.

    ``site_dims`` are the dimensions of the spanned sites; ``start`` is the
    index of the first one.
    """

    start: int
    site_dims: tuple[int, ...]
    block: np.ndarray = field(repr=False)
    label: str = ""

    def __post_init__(self):
        site_dims = tuple(int(d) for d in self.site_dims)
        object.__setattr__(self, "site_dims", site_dims)
        block = _readonly(self.block)
        n = prod(site_dims)
        if block.shape != (n, n):
            raise ValueError(
                f"block of shape {block.shape} does not match spanned site dims {site_dims}"
            )
        scale = max(np.abs(block).max(initial=0.0), 1.0)
        if np.abs(block - block.conj().T).max(initial=0.0) > HERMITIAN_RTOL * scale:
            raise ValueError("LocalTerm block is not Hermitian")
        if self.start < 0:
            raise ValueError("start site must be non-negative")
        object.__setattr__(self, "block", block)

    @property
    def sites(self) -> range:
        return range(self.start, self.start + len(self.site_dims))

    def at(self, start: int) -> "LocalTerm":
        """Same block placed at a different first site."""
        return LocalTerm(start, self.site_dims, self.block, self.label)

    def check_shape(self, shape: ChainShape) -> None:
        stop = self.start + len(self.site_dims)
        if stop > shape.n_sites:
            raise ValueError(f"term on sites {list(self.sites)} exceeds shape with {shape.n_sites} sites")
        actual = shape.dims[self.start:stop]
        if actual != self.site_dims:
            raise ValueError(
                f"term expects site dims {self.site_dims} but shape has {actual} at sites {list(self.sites)}"
            )


def apply_block(block: np.ndarray, vec: np.ndarray, left: int, mid: int, right: int) -> np.ndarray:
    """Return ``(I_left (x) block (x) I_right) @ vec`` without forming the Kronecker product.

    ``vec`` may carry trailing batch columns: shape ``(left*mid*right,)`` or
    ``(left*mid*right, b)``.
    """
    batch = vec.shape[1:]
    v = vec.reshape((left, mid, right) + batch)
    out = np.tensordot(block, v, axes=([1], [1]))  # (mid, left, right, *batch)
    out = np.moveaxis(out, 0, 1)
    return out.reshape((left * mid * right,) + batch)


def _term_geometry(term: LocalTerm, shape: ChainShape) -> tuple[int, int, int]:
    stop = term.start + len(term.site_dims)
    return shape.span_dim(0, term.start), term.block.shape[0], shape.span_dim(stop, shape.n_sites)


@dataclass(frozen=True)
class StateVector:
    """Complex amplitudes over a ChainShape."""

    shape: ChainShape
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.size != self.shape.total_dim:
            raise ValueError(f"{amps.size} amplitudes for a shape of total dimension {self.shape.total_dim}")
        object.__setattr__(self, "amplitudes", _readonly(amps))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        n = self.norm
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.shape, self.amplitudes / n)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.shape.dims)


@dataclass(frozen=True)
class DensityMatrix:
    """Unit-trace positive semidefinite matrix on a (sub)chain."""

    shape: ChainShape
    matrix: np.ndarray = field(repr=False)
    atol: float = field(default=1e-12, repr=False)

    def __post_init__(self):
        rho = np.asarray(self.matrix, dtype=np.complex128)
        n = self.shape.total_dim
        if rho.shape != (n, n):
            raise ValueError(f"density matrix of shape {rho.shape} for total dimension {n}")
        if np.abs(rho - rho.conj().T).max() > self.atol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > self.atol:
            raise ValueError(f"density matrix trace {np.trace(rho).real!r} differs from 1")
        if np.linalg.eigvalsh(rho).min() < -self.atol:
            raise ValueError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "matrix", _readonly(rho))

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)


def embed_apply(term: LocalTerm, state: StateVector) -> StateVector:
    """Apply a local term to a state vector, identity on every other site."""
    term.check_shape(state.shape)
    left, mid, right = _term_geometry(term, state.shape)
    return StateVector(state.shape, apply_block(term.block, state.amplitudes, left, mid, right))


def partial_trace(state: StateVector, keep_sites: Iterable[int]) -> DensityMatrix:
    """Reduced density matrix of ``state`` on ``keep_sites`` (kept in ascending order)."""
    keep = sorted(set(int(s) for s in keep_sites))
    n = state.shape.n_sites
    if not keep:
        raise ValueError("keep_sites must not be empty")
    if keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"keep_sites {keep} out of range for {n} sites")
    traced = [s for s in range(n) if s not in keep]
    psi = state.amplitudes.reshape(state.shape.dims)
    rho = np.tensordot(psi, psi.conj(), axes=(traced, traced))
    d = prod(state.shape.dims[s] for s in keep)
    rho = rho.reshape(d, d)
    tr = np.trace(rho).real
    if tr == 0:
        raise ValueError("state has zero norm")
    return DensityMatrix(state.shape.subset(keep), rho / tr)


def inner(x, y) -> complex:
    """<x|y> for StateVectors or plain arrays."""
    a = x.amplitudes if isinstance(x, StateVector) else np.asarray(x)
    b = y.amplitudes if isinstance(y, StateVector) else np.asarray(y)
    return complex(np.vdot(a, b))


class ChainOperator:
    """Sum of local Hermitian terms on a ChainShape.

    ``apply`` never builds the full matrix. With ``threads > 1`` the terms are
    evaluated concurrently; ``deterministic=True`` (the default) sums the partial
    results in term order so repeated runs are bit-identical.
    """

    def __init__(self, shape: ChainShape, terms: Sequence[LocalTerm]):
        self.shape = shape
        self.terms = tuple(terms)
        for t in self.terms:
            t.check_shape(shape)
        self._geometry = [_term_geometry(t, shape) for t in self.terms]

    def __repr__(self):
        return f"ChainOperator(dims={self.shape.dims}, n_terms={len(self.terms)})"

    @property
    def dim(self) -> int:
        return self.shape.total_dim

    def __add__(self, other: "ChainOperator") -> "ChainOperator":
        if other.shape != self.shape:
            raise ValueError("cannot add operators on different shapes")
        return ChainOperator(self.shape, self.terms + other.terms)

    def _term_apply(self, i: int, vec: np.ndarray) -> np.ndarray:
        left, mid, right = self._geometry[i]
        return apply_block(self.terms[i].block, vec, left, mid, right)

    def apply(self, vec, *, threads: int = 1, deterministic: bool = True) -> np.ndarray:
        """Matrix-free product with a vector or a block of column vectors."""
        if isinstance(vec, StateVector):
            if vec.shape != self.shape:
                raise ValueError("state shape does not match operator shape")
            vec = vec.amplitudes
        vec = np.asarray(vec)
        if vec.shape[0] != self.dim:
            raise ValueError(f"vector of length {vec.shape[0]} for operator of dimension {self.dim}")
        dtype = np.result_type(vec.dtype, *(t.block.dtype for t in self.terms))
        out = np.zeros(vec.shape, dtype=dtype)
        if threads <= 1 or len(self.terms) < 2:
            for i in range(len(self.terms)):
                out += self._term_apply(i, vec)
            return out
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(self._term_apply, i, vec): i for i in range(len(self.terms))}
            if deterministic:
                parts = [None] * len(self.terms)
                for fut in as_completed(futures):
                    parts[futures[fut]] = fut.result()
                for p in parts:
                    out += p
            else:
                for fut in as_completed(futures):
                    out += fut.result()
        return out

    def expectation(self, state: StateVector) -> float:
        return float(np.vdot(state.amplitudes, self.apply(state.amplitudes)).real)

    def to_sparse(self) -> sp.csr_matrix:
        """Explicit sparse matrix (CSR)."""
        n = self.dim
        dtype = np.result_type(*(t.block.dtype for t in self.terms)) if self.terms else float
        total = sp.csr_matrix((n, n), dtype=dtype)
        for t, (left, mid, right) in zip(self.terms, self._geometry):
            blk = sp.csr_matrix(t.block)
            total = total + sp.kron(sp.kron(sp.identity(left, format="csr"), blk), sp.identity(right), format="csr")
        total.sum_duplicates()
        total.eliminate_zeros()
        return total

    def to_dense(self) -> np.ndarray:
        """Explicit Kronecker-embedded dense matrix; for small shapes only."""
        n = self.dim
        dtype = np.result_type(*(t.block.dtype for t in self.terms)) if self.terms else float
        total = np.zeros((n, n), dtype=dtype)
        for t, (left, mid, right) in zip(self.terms, self._geometry):
            total += np.kron(np.kron(np.eye(left), t.block), np.eye(right))
        return total

    def as_linear_operator(self, *, threads: int = 1, deterministic: bool = True) -> LinearOperator:
        dtype = np.result_type(*(t.block.dtype for t in self.terms)) if self.terms else float

        def mv(v):
            return self.apply(v, threads=threads, deterministic=deterministic)

        return LinearOperator((self.dim, self.dim), matvec=mv, matmat=mv, rmatvec=mv, dtype=dtype)
