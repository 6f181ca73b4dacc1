"""CSV and plot-data emitters shared by the pipeline."""
from __future__ import annotations

import csv
import io
from typing import Iterable, Sequence

import numpy as np

from . import __version__

__all__ = ["fmt", "csv_text", "write_text", "plot_text"]


def fmt(x) -> str:
    """17 significant digits for floats; integers and strings pass through."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def csv_text(header: Sequence[str], rows: Iterable[Sequence], *, theta, epsilon: float = 1.0,
             extra: dict | None = None) -> str:
    """CSV document: one ``#`` comment line with run metadata, a header row, then data rows."""
    if isinstance(theta, (list, tuple, np.ndarray)):
        theta_s = ";".join(fmt(float(t)) for t in theta)
    else:
        theta_s = fmt(float(theta))
    meta = [f"theta={theta_s}", f"epsilon={fmt(float(epsilon))}", f"version=telegap {__version__}"]
    if extra:
        meta += [f"{k}={v}" for k, v in extra.items()]
    buf = io.StringIO()
    buf.write("# " + " ".join(meta) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    return buf.getvalue()


def plot_text(columns: Sequence[Sequence[float]], names: Sequence[str], comment: str = "") -> str:
    """Whitespace-separated columns with a ``#`` header naming them."""
    cols = [np.asarray(c, dtype=float) for c in columns]
    if not 2 <= len(cols) <= 3 or len(names) != len(cols):
        raise ValueError("plot data holds two or three named columns")
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError("plot columns must have equal length")
    lines = []
    if comment:
        lines.append("# " + comment)
    lines.append("# " + " ".join(names))
    for i in range(n):
        lines.append(" ".join(format(c[i], ".17g") for c in cols))
    return "\n".join(lines) + "\n"


def write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
