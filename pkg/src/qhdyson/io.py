"""File formats: matrices and reports as JSON, time series as CSV."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigInvalid


def matrix_to_json(m) -> dict:
    """``{"dim": n, "re": [...], "im": [...]}`` with row-major flat entry lists."""
    m = np.asarray(m, dtype=complex)
    return {"dim": int(m.shape[0]), "re": m.real.ravel().tolist(), "im": m.imag.ravel().tolist()}


def matrix_from_json(raw, path: str = "matrix") -> np.ndarray:
    if not isinstance(raw, dict):
        raise ConfigInvalid(path, "expected a matrix record {dim, re, im}")
    extra = set(raw) - {"dim", "re", "im"}
    if extra:
        raise ConfigInvalid(f"{path}.{sorted(extra)[0]}", "unknown key")
    dim = raw.get("dim")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ConfigInvalid(f"{path}.dim", "expected a positive integer")
    re = raw.get("re")
    im = raw.get("im", [0.0] * dim * dim)
    for key, vals in (("re", re), ("im", im)):
        if not isinstance(vals, list) or len(vals) != dim * dim:
            raise ConfigInvalid(f"{path}.{key}", f"expected {dim * dim} numbers")
    try:
        m = np.array(re, dtype=float) + 1j * np.array(im, dtype=float)
    except (TypeError, ValueError):
        raise ConfigInvalid(path, "entries must be numbers") from None
    return m.reshape(dim, dim)


def matrix_columns(prefix: str, values: np.ndarray) -> dict[str, np.ndarray]:
    """Split a trajectory of matrices into ``<prefix>_<i><j>_re/_im`` columns."""
    out = {}
    n = values.shape[1]
    for i in range(n):
        for j in range(n):
            out[f"{prefix}_{i}{j}_re"] = values[:, i, j].real
            out[f"{prefix}_{i}{j}_im"] = values[:, i, j].imag
    return out


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def format_float(x) -> str:
    return format(float(x), ".17g")


def write_series_csv(path, t, columns: dict[str, np.ndarray]) -> Path:
    """One row per node: ``t`` first, then the named columns in the given order."""
    path = Path(path)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = list(columns)
    writer.writerow(["t"] + names)
    cols = [np.asarray(columns[k], dtype=float) for k in names]
    for k, tk in enumerate(np.asarray(t, dtype=float)):
        writer.writerow([format_float(tk)] + [format_float(c[k]) for c in cols])
    _atomic_write(path, buf.getvalue())
    return path


def write_table_csv(path, rows: list[dict]) -> Path:
    path = Path(path)
    names: list[str] = []
    for row in rows:
        names.extend(k for k in row if k not in names)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: format_float(v) if isinstance(v, float) else v for k, v in row.items()})
    _atomic_write(path, buf.getvalue())
    return path


def read_series_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    _atomic_write(path, dump_json(obj))
    return path
