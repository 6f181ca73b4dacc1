"""Conserved labels of the capped chain basis.

Two quantities commute with every term of the chain operator (and of the
single-excitation operator built from it):

* the IDLE-mismatch pattern, i.e. which qutrit pairs hold exactly one IDLE.
  Each mismatched pair pays the full penalty, so a sector with ``r``
  mismatched pairs has no level below ``r * epsilon``;
* a staggered charge ``Q = sum_s (-1)**s z_s`` with z = +1, -1, 0 for
  |0>, |1>, |IDLE> (a remnant of the U(x)U* invariance of |Phi+>).

Both are read off the site digits of a basis index, so sectors are plain index
sets into the amplitude vector.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
import scipy.sparse as sp

from .model import IDLE
from .tensor import ChainShape

__all__ = ["Sector", "site_digits", "mismatch_flags", "staggered_charge", "sectors", "restricted_matrix"]

_Z = np.array([1, -1, 0])


@dataclass(frozen=True)
class Sector:
    mismatch: tuple[int, ...]
    charge: int
    indices: np.ndarray

    @property
    def n_mismatched(self) -> int:
        return int(sum(self.mismatch))

    @property
    def dim(self) -> int:
        return int(self.indices.size)


def _check_layout(shape: ChainShape) -> int:
    d = shape.dims
    if len(d) < 4 or d[0] != 2 or d[-1] != 2 or any(x != 3 for x in d[1:-1]) or (len(d) - 2) % 2:
        raise ValueError(f"expected a capped chain layout [2, 3, ..., 3, 2], got {list(d)}")
    return (len(d) - 2) // 2


def site_digits(shape: ChainShape) -> np.ndarray:
    """Array of shape (n_sites, total_dim) with the level of each site in each basis state."""
    idx = np.arange(shape.total_dim)
    out = np.empty((shape.n_sites, shape.total_dim), dtype=np.int8)
    for s in range(shape.n_sites - 1, -1, -1):
        d = shape.dims[s]
        out[s] = idx % d
        idx //= d
    return out


def mismatch_flags(shape: ChainShape, digits: np.ndarray | None = None) -> np.ndarray:
    """(n_pairs, total_dim) booleans: pair j holds exactly one IDLE."""
    n = _check_layout(shape)
    dg = site_digits(shape) if digits is None else digits
    return np.stack([(dg[2 * j + 1] == IDLE) ^ (dg[2 * j + 2] == IDLE) for j in range(n)])


def staggered_charge(shape: ChainShape, digits: np.ndarray | None = None) -> np.ndarray:
    _check_layout(shape)
    dg = site_digits(shape) if digits is None else digits
    signs = np.where(np.arange(shape.n_sites) % 2 == 0, 1, -1)
    return (signs[:, None] * _Z[dg]).sum(axis=0)


def sectors(shape: ChainShape, max_mismatched: int | None = None) -> list[Sector]:
    """All nonempty (mismatch pattern, charge) sectors, ordered by number of mismatches then charge."""
    n = _check_layout(shape)
    dg = site_digits(shape)
    flags = mismatch_flags(shape, dg)
    q = staggered_charge(shape, dg)
    weights = 1 << np.arange(n)
    code = (flags.astype(np.int64) * weights[:, None]).sum(axis=0)
    out = []
    patterns = sorted(product((0, 1), repeat=n), key=lambda p: (sum(p), p))
    for pat in patterns:
        if max_mismatched is not None and sum(pat) > max_mismatched:
            continue
        c = int(np.dot(pat, weights))
        in_pat = np.flatnonzero(code == c)
        for charge in np.unique(q[in_pat]):
            out.append(Sector(tuple(pat), int(charge), in_pat[q[in_pat] == charge]))
    return out


def restricted_matrix(op, indices: np.ndarray) -> np.ndarray:
    """Dense block ``op[indices][:, indices]`` of a ChainOperator, built one term at a time."""
    idx = np.asarray(indices)
    n = op.dim
    out = np.zeros((idx.size, idx.size), dtype=np.result_type(*(t.block.dtype for t in op.terms)))
    for t in op.terms:
        left = op.shape.span_dim(0, t.start)
        right = n // (left * t.block.shape[0])
        full = sp.kron(sp.kron(sp.identity(left, format="csr"), sp.csr_matrix(t.block)),
                       sp.identity(right, format="csr"), format="csr")
        out += full[idx][:, idx].toarray()
    return out
