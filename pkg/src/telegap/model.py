"""Hamiltonian construction for the capped qutrit chain.

Every block is written in the fixed site basis (|0>, |1>, |IDLE>) with IDLE at
index 2; qubit sites carry only (|0>, |1>).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .tensor import ChainOperator, ChainShape, LocalTerm

__all__ = [
    "IDLE",
    "ModelParams",
    "basis_ket",
    "bell_vector",
    "build_create_pair",
    "build_projection",
    "build_unit",
    "build_chain",
    "dump_operator",
    "load_operator",
]

IDLE = 2
HALF_PI = np.pi / 2


def check_theta(theta: float) -> float:
    theta = float(theta)
    if not np.isfinite(theta) or theta < 0.0 or theta > HALF_PI:
        raise ValueError(f"theta must lie in [0, pi/2], got {theta!r}")
    return theta


def check_epsilon(eps: float) -> float:
    eps = float(eps)
    if not np.isfinite(eps) or eps <= 0:
        raise ValueError(f"epsilon must be positive, got {eps!r}")
    return eps


@dataclass(frozen=True)
class ModelParams:
    """Coupling angle, energy scale and number of qutrit pairs."""

    theta: float
    epsilon: float = 1.0
    ell: int = 1

    def __post_init__(self):
        object.__setattr__(self, "theta", check_theta(self.theta))
        object.__setattr__(self, "epsilon", check_epsilon(self.epsilon))
        if int(self.ell) != self.ell or self.ell < 1:
            raise ValueError(f"ell must be a positive integer, got {self.ell!r}")
        object.__setattr__(self, "ell", int(self.ell))

    @property
    def shape(self) -> ChainShape:
        return ChainShape.chain(self.ell)


def basis_ket(*levels: int, dims: tuple[int, ...]) -> np.ndarray:
    """Product basis vector |levels[0], levels[1], ...> over ``dims``."""
    if len(levels) != len(dims):
        raise ValueError("one level per site is required")
    out = np.array([1.0])
    for lv, d in zip(levels, dims):
        e = np.zeros(d)
        e[lv] = 1.0
        out = np.kron(out, e)
    return out


def bell_vector(d_left: int = 2, d_right: int = 2) -> np.ndarray:
    """(|00> + |11>)/sqrt(2) embedded in a d_left x d_right space."""
    dims = (d_left, d_right)
    return (basis_ket(0, 0, dims=dims) + basis_ket(1, 1, dims=dims)) / np.sqrt(2)


def _check_site_dim(d: int) -> int:
    if d not in (2, 3):
        raise ValueError(f"site dimension must be 2 or 3, got {d!r}")
    return d


def build_create_pair(eps: float = 1.0, d_left: int = 2, d_right: int = 2, start: int = 0) -> LocalTerm:
    """Pair-creation term: energy eps for the three Bell states other than |Phi+>.

    Built as eps/2 times the sum of the outer products of (|00>-|11>),
    (|01>+|10>) and (|01>-|10>); IDLE levels, when present, are untouched.
    """
    eps = check_epsilon(eps)
    dims = (_check_site_dim(d_left), _check_site_dim(d_right))
    k = lambda a, b: basis_ket(a, b, dims=dims)  # noqa: E731
    others = (k(0, 0) - k(1, 1), k(0, 1) + k(1, 0), k(0, 1) - k(1, 0))
    block = 0.5 * eps * sum(np.outer(v, v) for v in others)
    return LocalTerm(start, dims, block, "create_pair")


def projection_vector(theta: float) -> np.ndarray:
    """sin(theta)|Phi+> - cos(theta)|IDLE, IDLE> on a qutrit pair."""
    theta = check_theta(theta)
    return np.sin(theta) * bell_vector(3, 3) - np.cos(theta) * basis_ket(IDLE, IDLE, dims=(3, 3))


def build_projection(theta: float, eps: float = 1.0, start: int = 0) -> LocalTerm:
    """Qutrit-pair term: the projector onto ``projection_vector`` plus IDLE-mismatch penalties."""
    eps = check_epsilon(eps)
    w = projection_vector(theta)
    block = np.outer(w, w)
    for b in (0, 1):
        for v in (basis_ket(IDLE, b, dims=(3, 3)), basis_ket(b, IDLE, dims=(3, 3))):
            block += np.outer(v, v)
    return LocalTerm(start, (3, 3), eps * block, "projection")


def build_unit(theta: float, eps: float = 1.0, d_next: int = 2) -> ChainOperator:
    """Projection on sites (0, 1) plus pair creation on sites (1, 2) of a [3, 3, d_next] block."""
    d_next = _check_site_dim(d_next)
    shape = ChainShape((3, 3, d_next))
    return ChainOperator(shape, [build_projection(theta, eps, 0), build_create_pair(eps, 3, d_next, 1)])


def build_chain(params: ModelParams) -> ChainOperator:
    """Full chain operator: leading pair creation on the left cap, then one unit per cell."""
    ell, eps, theta = params.ell, params.epsilon, params.theta
    terms = [build_create_pair(eps, 2, 3, 0)]
    proj = build_projection(theta, eps)
    for j in range(ell):
        a = 2 * j + 1
        terms.append(proj.at(a))
        terms.append(build_create_pair(eps, 3, 3 if j < ell - 1 else 2, a + 1))
    return ChainOperator(params.shape, terms)


# --------------------------------------------------------------------------
# JSON operator dumps (blocks stored in units of epsilon)


def dump_operator(op: ChainOperator, epsilon: float = 1.0, meta: dict | None = None) -> str:
    """Serialize a ChainOperator; nonzero entries become [row, col, re, im] quadruples."""
    eps = check_epsilon(epsilon)
    terms = []
    for t in op.terms:
        blk = t.block / eps
        rows, cols = np.nonzero(blk)
        entries = [[int(r), int(c), float(blk[r, c].real), float(np.imag(blk[r, c]))] for r, c in zip(rows, cols)]
        terms.append({"label": t.label, "sites": [t.start, t.start + len(t.site_dims) - 1],
                      "site_dims": list(t.site_dims), "entries": entries})
    doc = {"shape": list(op.shape.dims), "units": "epsilon", "terms": terms}
    if meta:
        doc["meta"] = meta
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def load_operator(text: str, epsilon: float = 1.0) -> ChainOperator:
    doc = json.loads(text)
    shape = ChainShape(tuple(doc["shape"]))
    terms = []
    for t in doc["terms"]:
        dims = tuple(t["site_dims"])
        n = int(np.prod(dims))
        blk = np.zeros((n, n), dtype=complex)
        for r, c, re, im in t["entries"]:
            blk[r, c] = re + 1j * im
        if not np.any(blk.imag):
            blk = blk.real
        terms.append(LocalTerm(t["sites"][0], dims, epsilon * blk, t.get("label", "")))
    return ChainOperator(shape, terms)
