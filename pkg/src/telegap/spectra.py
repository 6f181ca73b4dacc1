"""Exact diagonalization of the capped chain.

Short chains (total dimension up to ``DENSE_LIMIT``) are diagonalized whole.
Longer chains are split into (IDLE-mismatch pattern, staggered charge) sectors;
sectors with ``r`` mismatched pairs are only visited while ``r * epsilon`` is
below the highest level requested so far, so at generic angles only the
mismatch-free part (dimension 4 * 5**ell) is ever diagonalized.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .eigensolve import DENSE_LIMIT, ConvergenceError, SpectrumResult, find_clusters, lowest_k
from .ground_state import Isometry, contract_chain, g0_isometry
from .model import ModelParams, build_chain
from .output import csv_text, plot_text
from .sectors import restricted_matrix, sectors
from .tensor import StateVector

logger = logging.getLogger(__name__)

__all__ = [
    "SECTOR_DENSE_LIMIT",
    "GapRecord",
    "PowerLawFit",
    "GapTable",
    "FlipIsometry",
    "ed_spectrum",
    "gap_record",
    "gap_table",
    "fit_power_law",
    "spin_wave_state",
    "triplet_overlap",
    "principal_overlaps",
]

#: Largest single sector handed to the dense solver (200 MB of float64).
SECTOR_DENSE_LIMIT = 5000


def ed_spectrum(params: ModelParams, k: int = 6, tol: float = 1e-10, *, method: str = "auto",
                dense_limit: int = DENSE_LIMIT, sector_dense_limit: int = SECTOR_DENSE_LIMIT) -> SpectrumResult:
    """The ``k`` lowest levels of the chain operator, eigenvectors in the full basis.

    ``method`` is ``"dense"`` (whole matrix), ``"sectors"`` or ``"auto"``.
    Residuals are always recomputed matrix-free on the full chain.
    """
    op = build_chain(params)
    n = op.dim
    if k < 1 or k > n:
        raise ValueError(f"k={k} outside 1..{n}")
    if method == "auto":
        method = "dense" if n <= dense_limit else "sectors"
    if method == "dense":
        vals, vecs = sla.eigh(op.to_dense(), subset_by_index=[0, k - 1])
    elif method == "sectors":
        vals, vecs = _sector_lowest(op, k, params.epsilon, tol, sector_dense_limit)
    else:
        raise ValueError(f"unknown method {method!r}")
    res = np.linalg.norm(op.apply(vecs) - vecs * vals[None, :], axis=0)
    ok = bool(np.all(res <= tol * max(1.0, params.epsilon)))
    result = SpectrumResult(vals, vecs, res, ok, f"ed-{method}", 1, k)
    if not ok:
        raise ConvergenceError(f"exact diagonalization residual {res.max():.3e} exceeds {tol:.1e}", result)
    return result


def _sector_lowest(op, k, eps, tol, sector_dense_limit):
    n = op.dim
    by_r: dict[int, list] = {}
    for s in sectors(op.shape):
        by_r.setdefault(s.n_mismatched, []).append(s)
    vals_all, cols = [], []
    for r in sorted(by_r):
        if r > 0 and len(vals_all) >= k and np.sort(vals_all)[k - 1] < r * eps * (1 - 1e-12):
            break
        for s in by_r[r]:
            kk = min(k, s.dim)
            sub = restricted_matrix(op, s.indices)
            if s.dim <= sector_dense_limit:
                w, v = sla.eigh(sub, subset_by_index=[0, kk - 1])
            else:
                sol = lowest_k(sub, kk, tol * 1e-2, method="krylov")
                w, v = sol.eigenvalues, sol.eigenvectors
            logger.debug("sector %s Q=%d dim %d: %s", s.mismatch, s.charge, s.dim, w[:3])
            for j in range(kk):
                full = np.zeros(n, dtype=v.dtype)
                full[s.indices] = v[:, j]
                vals_all.append(w[j])
                cols.append(full)
    order = np.argsort(vals_all, kind="stable")[:k]
    return np.asarray(vals_all)[order], np.stack([cols[i] for i in order], axis=1)


# --------------------------------------------------------------------------
# gap tables


@dataclass(frozen=True)
class GapRecord:
    ell: int
    theta: float
    ground_energy: float
    gap: float
    degeneracy: int
    residuals: tuple[float, ...] = field(repr=False)
    levels: tuple[float, ...] = field(default=(), repr=False)
    triplet_spread: float = 0.0


def gap_record(params: ModelParams, k: int = 6, **kwargs) -> tuple[GapRecord, SpectrumResult]:
    spec = ed_spectrum(params, k, **kwargs)
    eps = params.epsilon
    clusters = find_clusters(spec.eigenvalues / eps)
    if len(clusters) < 2:
        raise ValueError(f"k={k} does not reach past the ground level; increase k")
    e0 = float(spec.eigenvalues[0])
    first = spec.eigenvalues[clusters[1]]
    rec = GapRecord(params.ell, params.theta, e0, float(first.mean() - e0), len(clusters[1]),
                    tuple(float(r) for r in spec.residual_norms), tuple(float(x) for x in spec.eigenvalues),
                    float(first.max() - first.min()))
    return rec, spec


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares fit of log(gap) = log(c) - p log(ell)."""

    c: float
    p: float
    log_residuals: tuple[float, ...]

    def __call__(self, ell):
        return self.c * np.asarray(ell, dtype=float) ** (-self.p)


def fit_power_law(ells: Sequence[int], gaps: Sequence[float], p: float | None = None) -> PowerLawFit:
    """Fit ``gap ~ c / ell**p``; with ``p`` given only the prefactor is fitted."""
    x = np.log(np.asarray(ells, dtype=float))
    y = np.log(np.asarray(gaps, dtype=float))
    if p is None:
        if x.size < 2:
            raise ValueError("power-law fit needs at least two points")
        slope, icept = np.polyfit(x, y, 1)
        p_fit = -slope
    else:
        p_fit = float(p)
        icept = float(np.mean(y + p_fit * x))
    res = y - (icept - p_fit * x)
    return PowerLawFit(float(np.exp(icept)), float(p_fit), tuple(float(r) for r in res))


@dataclass
class GapTable:
    theta: float
    records: list[GapRecord]
    fit: PowerLawFit
    epsilon: float = 1.0

    @property
    def ells(self) -> list[int]:
        return [r.ell for r in self.records]

    @property
    def gaps(self) -> np.ndarray:
        return np.array([r.gap for r in self.records])

    def to_csv(self) -> str:
        e = self.epsilon
        rows = [(r.ell, r.theta, r.ground_energy / e, r.gap / e, r.degeneracy, res)
                for r, res in zip(self.records, self.fit.log_residuals)]
        return csv_text(["ell", "theta", "ground_energy", "gap", "degeneracy", "fit_residual"], rows,
                        theta=self.theta, epsilon=e,
                        extra={"fit_c": format(self.fit.c / e, ".17g"), "fit_p": format(self.fit.p, ".17g")})

    def plot_data(self, samples: int = 50) -> str:
        """Computed gaps, then the fitted curve sampled on a fine grid."""
        e = self.epsilon
        pts = plot_text([self.ells, self.gaps / e], ["ell", "gap"], comment=f"theta={self.theta!r} gaps")
        xs = np.linspace(min(self.ells), max(self.ells), samples)
        curve = plot_text([xs, self.fit(xs) / e], ["ell", "fit"],
                          comment=f"fit c={self.fit.c / e:.17g} p={self.fit.p:.17g}")
        return pts + "\n\n" + curve


def gap_table(theta: float, ells: Sequence[int], *, epsilon: float = 1.0, k: int = 6,
              threads: int = 1, **kwargs) -> GapTable:
    """Gaps for each chain length and a power-law fit over all of them."""
    ells = list(ells)

    def one(ell):
        return gap_record(ModelParams(theta, epsilon, ell), k, **kwargs)[0]

    if threads > 1 and len(ells) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(one, ells))
    else:
        records = [one(ell) for ell in ells]
    fit = fit_power_law(ells, [r.gap for r in records]) if len(ells) > 1 else PowerLawFit(
        records[0].gap, 0.0, (0.0,))
    return GapTable(theta, records, fit, epsilon)


# --------------------------------------------------------------------------
# spin-wave states


class FlipIsometry(Isometry):
    """Cell isometry that flips or dephases the logical bond bit.

    ``g1``: |b> -> |psi0(1-b)>; ``g2``: |0> -> |psi0(1)>, |1> -> -|psi0(0)>;
    ``g3``: |b> -> (-1)**b |psi0(b)>.
    """

    LABELS = ("g1", "g2", "g3")

    @classmethod
    def from_label(cls, label: str, theta: float) -> "FlipIsometry":
        p = g0_isometry(theta).columns
        p0, p1 = p[:, 0], p[:, 1]
        table = {"g1": (p1, p0), "g2": (p1, -p0), "g3": (p0, -p1)}
        if label not in table:
            raise ValueError(f"unknown flip label {label!r}; expected one of {cls.LABELS}")
        return cls(np.stack(table[label], axis=1), 1, label)


def spin_wave_state(params: ModelParams, flip: Isometry, normalize: bool = True) -> StateVector:
    """Equal-weight sum over cells of the ground state with one cell isometry replaced by ``flip``."""
    if flip.m != 1:
        raise ValueError("spin waves are built from single-cell isometries")
    g = g0_isometry(params.theta).tensor()
    f = flip.tensor()
    total = sum(contract_chain([f if j == J else g for j in range(params.ell)]) for J in range(params.ell))
    if normalize:
        nrm = np.linalg.norm(total)
        if nrm < 1e-14:
            raise ValueError("spin-wave sum vanishes; the flip isometry has no component off the ground state")
        total = total / nrm
    return StateVector(params.shape, total)


def principal_overlaps(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cosines of the principal angles between span(a) and span(b), descending."""
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    return np.linalg.svd(qa.conj().T @ qb, compute_uv=False)


@dataclass
class TripletOverlap:
    principal: np.ndarray
    spin_wave_gram: np.ndarray
    record: GapRecord


def triplet_overlap(params: ModelParams, k: int = 6, **kwargs) -> TripletOverlap:
    """Compare the exact first excited triplet with the three flip spin waves."""
    rec, spec = gap_record(params, k, **kwargs)
    clusters = find_clusters(spec.eigenvalues / params.epsilon)
    trip = spec.eigenvectors[:, clusters[1]]
    if trip.shape[1] != 3:
        raise ValueError(f"first excited level has degeneracy {trip.shape[1]}, not 3")
    waves = np.stack([spin_wave_state(params, FlipIsometry.from_label(lb, params.theta)).amplitudes
                      for lb in FlipIsometry.LABELS], axis=1)
    gram = waves.conj().T @ waves
    return TripletOverlap(principal_overlaps(trip, waves), gram, rec)
