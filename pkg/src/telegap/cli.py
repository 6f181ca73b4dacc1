"""Command-line entry point.

Exit codes: 0 success, 2 invalid configuration (one-line diagnostic on
stderr), 3 eigensolver non-convergence.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field

import numpy as np

from .eigensolve import ConvergenceError
from .output import csv_text, write_text

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def parse_int_list(text: str) -> list[int]:
    """``"3"``, ``"1..5"`` (inclusive) or ``"1,2,4"``."""
    out: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if ".." in part:
                a, b = part.split("..")
                a, b = int(a), int(b)
                if b < a:
                    raise ConfigError(f"empty range {part!r}")
                out.extend(range(a, b + 1))
            else:
                out.append(int(part))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot parse integer list {text!r}") from None
    if not out:
        raise ConfigError(f"empty integer list {text!r}")
    return out


def parse_float_list(text: str) -> list[float]:
    try:
        vals = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse number list {text!r}") from None
    if not vals:
        raise ConfigError(f"empty number list {text!r}")
    return vals


@dataclass
class RunConfig:
    command: str
    thetas: list[float] = field(default_factory=list)
    ells: list[int] = field(default_factory=list)
    cells: list[int] = field(default_factory=list)
    phi: float = 0.0
    epsilon: float = 1.0
    k: int = 6
    tol: float | None = None
    method: str = "auto"
    out: str | None = None
    plot_out: str | None = None
    threads: int = 1
    deterministic: bool = False

    def validate(self) -> "RunConfig":
        half_pi = np.pi / 2
        if not np.isfinite(self.epsilon) or self.epsilon <= 0:
            raise ConfigError(f"--epsilon must be positive, got {self.epsilon!r}")
        if self.threads < 1:
            raise ConfigError("--threads must be at least 1")
        for t in self.thetas:
            if not 0 <= t <= half_pi:
                raise ConfigError(f"theta {t!r} outside [0, pi/2]")
        if self.command == "sweep-theta" and any(not 0 < t < half_pi for t in self.thetas):
            raise ConfigError("sweep angles must lie strictly inside (0, pi/2)")
        if self.command == "appendix-check" and any(not 1.5 <= t < half_pi for t in self.thetas):
            raise ConfigError("appendix-check needs theta in [1.5, pi/2)")
        if any(l < 1 for l in self.ells):
            raise ConfigError("chain lengths must be at least 1")
        if self.command == "ed" and max(self.ells, default=1) > 6:
            raise ConfigError("exact diagonalization supports ell <= 6")
        if any(not 1 <= m <= 5 for m in self.cells):
            raise ConfigError("unit cell sizes must lie in 1..5")
        if not 0 <= self.phi <= np.pi:
            raise ConfigError(f"--phi {self.phi!r} outside [0, pi]")
        if self.k < 2 and self.command == "ed":
            raise ConfigError("--k must be at least 2 to resolve a gap")
        if self.tol is not None and self.tol <= 0:
            raise ConfigError("--tol must be positive")
        return self


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--epsilon", type=float, default=1.0, help="energy unit used to rescale emitted values")
    common.add_argument("--threads", type=int, default=1, help="worker threads across independent points")
    common.add_argument("--deterministic", action="store_true", help="fixed-order reductions (reproducible bytes)")
    common.add_argument("--out", help="output file (CSV or JSON)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="telegap", description="Teleportation spin chain: spectra, fidelities, excitation gaps.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("model", parents=[common], help="dump the chain operator as JSON")
    s.add_argument("--theta", type=float, required=True)
    s.add_argument("--ell", type=int, required=True)

    s = sub.add_parser("ed", parents=[common], help="exact gaps versus chain length")
    s.add_argument("--theta", type=float, required=True)
    s.add_argument("--ell", required=True, help="lengths, e.g. 1..5")
    s.add_argument("--k", type=int, default=6, help="number of lowest levels")
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--method", choices=["auto", "dense", "sectors"], default="auto")
    s.add_argument("--plot-out", help="whitespace plot data: gaps and fitted curve")

    s = sub.add_parser("fidelity", parents=[common], help="Bell weight of the cap qubits")
    s.add_argument("--theta", required=True, help="angle or comma list")
    s.add_argument("--ell", required=True, help="lengths, e.g. 1..50")

    for name, hlp in (("excite", "variational gaps"), ("scan-cells", "gap versus unit cell size")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        s.add_argument("--theta", type=float, required=True)
        s.add_argument("--cells", required=True, help="unit cell sizes, e.g. 1,2 or 1..5")
        s.add_argument("--phi", type=float, default=0.0)
        s.add_argument("--tol", type=float, default=1e-14)
        s.add_argument("--method", choices=["auto", "dense", "sectors", "krylov"], default="auto")
        s.add_argument("--plot-out", help="whitespace plot data")

    s = sub.add_parser("sweep-theta", parents=[common], help="gap against fidelity")
    s.add_argument("--cells", required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--theta", help="comma list of angles")
    g.add_argument("--infidelity", help="comma list of 1-f values; angles are inverted from them")
    s.add_argument("--phi", type=float, default=0.0)
    s.add_argument("--tol", type=float, default=1e-14)
    s.add_argument("--method", choices=["auto", "dense", "sectors", "krylov"], default="auto")
    s.add_argument("--plot-out")

    s = sub.add_parser("appendix-check", parents=[common], help="single-flip triplet overlaps")
    s.add_argument("--theta", type=float, default=1.5707)
    return p


def _config(ns: argparse.Namespace) -> RunConfig:
    from .excitation import theta_for_infidelity

    cfg = RunConfig(ns.command, epsilon=ns.epsilon, threads=ns.threads, deterministic=ns.deterministic,
                    out=ns.out)
    c = ns.command
    if c == "sweep-theta":
        if ns.theta is not None:
            cfg.thetas = parse_float_list(ns.theta)
        else:
            q = parse_float_list(ns.infidelity)
            if any(not 0 < x < 1 for x in q):
                raise ConfigError("--infidelity values must lie in (0, 1)")
            cfg.thetas = [theta_for_infidelity(x) for x in q]
    elif c == "fidelity":
        cfg.thetas = parse_float_list(ns.theta)
    else:
        cfg.thetas = [ns.theta]
    if c in ("model",):
        cfg.ells = [ns.ell]
    if c in ("ed", "fidelity"):
        cfg.ells = parse_int_list(ns.ell)
    if c in ("excite", "scan-cells", "sweep-theta"):
        cfg.cells = parse_int_list(ns.cells)
        cfg.phi = ns.phi
    for name in ("k", "tol", "method", "plot_out"):
        if hasattr(ns, name):
            setattr(cfg, name, getattr(ns, name))
    return cfg.validate()


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        write_text(cfg.out, text)


def _run_model(cfg):
    from .model import ModelParams, build_chain, dump_operator

    params = ModelParams(cfg.thetas[0], cfg.epsilon, cfg.ells[0])
    op = build_chain(params)
    _emit(cfg, dump_operator(op, cfg.epsilon, {"theta": params.theta, "ell": params.ell}) + "\n")
    print(f"model theta={params.theta:.17g} ell={params.ell} dim={op.dim} terms={len(op.terms)}")


def _run_ed(cfg):
    from .spectra import gap_table

    table = gap_table(cfg.thetas[0], cfg.ells, epsilon=cfg.epsilon, k=cfg.k, tol=cfg.tol,
                      method=cfg.method, threads=cfg.threads)
    e = cfg.epsilon
    for r in table.records:
        print(f"ell={r.ell} E0={r.ground_energy / e:.6e} gap={r.gap / e:.6e} degeneracy={r.degeneracy}")
    print(f"fit gap = {table.fit.c / e:.6e} / ell^{table.fit.p:.4f}")
    _emit(cfg, table.to_csv())
    if cfg.plot_out:
        write_text(cfg.plot_out, table.plot_data())


def _run_fidelity(cfg):
    from .ground_state import fidelity_sweep

    recs = fidelity_sweep(cfg.thetas, cfg.ells)
    for r in recs:
        print(f"theta={r.theta:.6g} ell={r.ell} f={r.f_single:.12f} bell_weight={r.bell_weight:.12f}")
    rows = [(r.theta, r.ell, r.f_single, r.bell_weight, r.phi_plus_overlap) for r in recs]
    _emit(cfg, csv_text(["theta", "ell", "f_single", "bell_weight", "phi_plus_overlap"], rows,
                        theta=cfg.thetas if len(cfg.thetas) > 1 else cfg.thetas[0], epsilon=cfg.epsilon))


def _print_results(results, e):
    for r in results:
        print(f"m={r.m} theta={r.theta:.6g} phi={r.phi:.6g} gap={r.gap / e:.6e} degeneracy={r.degeneracy}")


def _run_cells(cfg):
    from .excitation import SweepTable, cell_plot_data, embedding_violations, unit_cell_scan

    results = unit_cell_scan(cfg.thetas[0], cfg.cells, phi=cfg.phi, epsilon=cfg.epsilon, tol=cfg.tol,
                             method=cfg.method, threads=cfg.threads)
    _print_results(results, cfg.epsilon)
    if cfg.command == "scan-cells":
        bad = embedding_violations(results)
        print("embedding monotonicity: " + ("ok" if not bad else f"violated for {bad}"))
    _emit(cfg, SweepTable(results, cfg.epsilon).to_csv())
    if cfg.plot_out:
        write_text(cfg.plot_out, cell_plot_data(results, cfg.epsilon))


def _run_sweep(cfg):
    from .excitation import theta_sweep

    table = theta_sweep(cfg.cells, cfg.thetas, phi=cfg.phi, epsilon=cfg.epsilon, tol=cfg.tol,
                        method=cfg.method, threads=cfg.threads)
    for r, q in zip(table.results, table.ratios):
        print(f"m={r.m} theta={r.theta:.10g} 1-f={1 - r.f_theta:.4e} gap={r.gap / cfg.epsilon:.6e} ratio={q:.4f}")
    _emit(cfg, table.to_csv())
    if cfg.plot_out:
        write_text(cfg.plot_out, table.plot_vs_f())


def _run_appendix(cfg):
    from .excitation import appendix_overlap

    theta = cfg.thetas[0]
    ov = appendix_overlap(theta)
    print("principal overlaps: " + " ".join(f"{x:.10f}" for x in ov))
    _emit(cfg, csv_text(["index", "overlap"], list(enumerate(ov)), theta=theta, epsilon=cfg.epsilon))


_DISPATCH = {
    "model": _run_model,
    "ed": _run_ed,
    "fidelity": _run_fidelity,
    "excite": _run_cells,
    "scan-cells": _run_cells,
    "sweep-theta": _run_sweep,
    "appendix-check": _run_appendix,
}


def run(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.WARNING, format="%(message)s")
        cfg = _config(ns)
    except ConfigError as exc:
        print(f"telegap: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        _DISPATCH[cfg.command](cfg)
    except ConvergenceError as exc:
        print(f"telegap: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, OSError) as exc:
        print(f"telegap: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
