"""CSV and text output with a fixed, versioned column layout."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

SCHEMA_VERSION = "deltasurf-csv-1"


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return str(v)


def write_csv(path, table: str, columns: Mapping[str, Sequence]) -> Path:
    """Write ``columns`` to ``path``.

    The first line is a comment ``# <schema version> <table>``; the second is
    the header.  Floats use ``repr`` so values round-trip exactly and do not
    depend on the locale.
    """
    path = Path(path)
    names = list(columns)
    cols = [list(columns[n]) for n in names]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("columns have unequal length")
    with path.open("w", newline="", encoding="ascii") as fh:
        fh.write(f"# {SCHEMA_VERSION} {table}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for i in range(n):
            w.writerow([_fmt(c[i]) for c in cols])
    return path


def read_csv(path) -> tuple[str, dict[str, list[str]]]:
    """Inverse of :func:`write_csv`; returns the table name and raw string columns."""
    with Path(path).open(encoding="ascii") as fh:
        first = fh.readline().split()
        if len(first) != 3 or first[1] != SCHEMA_VERSION:
            raise ValueError(f"{path}: missing or unknown schema token")
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return first[2], {h: [r[i] for r in body] for i, h in enumerate(header)}


def write_coo(path, matrix) -> Path:
    """Dump a sparse matrix as ``row col value`` lines for debugging."""
    import scipy.sparse as sp

    m = sp.coo_matrix(matrix)
    path = Path(path)
    with path.open("w", encoding="ascii") as fh:
        fh.write(f"# {SCHEMA_VERSION} coo {m.shape[0]} {m.shape[1]}\n")
        for r, c, v in zip(m.row, m.col, m.data):
            fh.write(f"{r} {c} {float(v)!r}\n")
    return path
