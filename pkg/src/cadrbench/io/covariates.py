"""CSV covariate ingestion and dataset export."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from ..core import CovariateMatrix, ScenarioDataset


class CovariateFileError(ValueError):
    pass


def read_sidecar(path) -> list[str]:
    """Binary column names: a JSON list, or one name per line."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        names = json.loads(text)
        if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
            raise CovariateFileError(f"{path}: sidecar must be a JSON list of column names")
        return names
    return [line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")]


def load_covariates(path, sidecar=None, binary=()) -> CovariateMatrix:
    """Read a header-first CSV of numeric covariates.

    Columns holding only 0 and 1 are flagged binary automatically; names from
    ``sidecar`` and ``binary`` are added to that set.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CovariateFileError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        seen = set()
        for h in header:
            if not h:
                raise CovariateFileError(f"{path}: empty column name in header")
            if h in seen:
                raise CovariateFileError(f"{path}: duplicate column name {h!r}")
            seen.add(h)
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise CovariateFileError(f"{path}: row {line} has {len(row)} fields, expected {len(header)}")
            vals = []
            for name, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise CovariateFileError(f"{path}: row {line}, column {name!r}: non-numeric value {cell!r}") from None
                if not math.isfinite(v):
                    raise CovariateFileError(f"{path}: row {line}, column {name!r}: non-finite value {cell!r}")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise CovariateFileError(f"{path}: no data rows")
    values = np.array(rows, dtype=float)
    detected = {h for j, h in enumerate(header) if np.all((values[:, j] == 0) | (values[:, j] == 1))}
    declared = set(binary) | (set(read_sidecar(sidecar)) if sidecar else set())
    unknown = declared - set(header)
    if unknown:
        raise CovariateFileError(f"{path}: binary columns not in header: {sorted(unknown)}")
    try:
        return CovariateMatrix(tuple(header), values, frozenset(detected | declared))
    except ValueError as exc:
        raise CovariateFileError(f"{path}: {exc}") from None


def _fmt(v: float) -> str:
    """Shortest round-tripping decimal; empty for NaN."""
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def write_covariates(X: CovariateMatrix, path, sidecar=None) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(X.names)
        for row in X.values:
            w.writerow([_fmt(v) for v in row])
    if sidecar is not None:
        Path(sidecar).write_text(json.dumps(sorted(X.binary_cols)) + "\n")


def write_dataset(ds: ScenarioDataset, path) -> None:
    """Covariates followed by ``t`` (label index), ``d`` and ``y``."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(ds.X.names) + ["t", "d", "y"])
        for i, row in enumerate(ds.X.values):
            w.writerow([_fmt(v) for v in row] + [int(ds.t[i]), _fmt(ds.d[i]), _fmt(ds.y[i])])


__all__ = ["CovariateFileError", "load_covariates", "read_sidecar", "write_covariates", "write_dataset"]
