"""Self-describing text tables.

Layout::

    # key: value            (one header line per metadata entry)
    col_a,col_b             (column names)
    1.25,0.031              (rows; floats written with repr so they round-trip)
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np


def config_hash(obj) -> str:
    """Short stable hash of a JSON-serialisable object."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def format_table(meta: dict, columns, rows) -> str:
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}: {v}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_table(path, meta: dict, columns, rows) -> None:
    Path(path).write_text(format_table(meta, columns, rows))


def read_table(path, numeric: bool = True):
    """Return ``(meta, columns)``; columns are float arrays when ``numeric``."""
    meta = {}
    body = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    reader = list(csv.reader(body))
    if not reader:
        raise ValueError(f"{path}: no column header")
    names, rows = reader[0], reader[1:]
    cols = {}
    for j, name in enumerate(names):
        values = [r[j] for r in rows]
        if numeric:
            cols[name] = np.array([float(v) for v in values])
        else:
            cols[name] = values
    return meta, cols
