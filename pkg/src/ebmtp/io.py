"""CSV and JSON plumbing for the command line."""

from __future__ import annotations

import csv
import json
import os
from typing import Optional, Sequence

import numpy as np

from .core import Dataset, ValidationError


def read_dataset_csv(path, treatment: str, outcome: str,
                     covariates: Optional[Sequence[str]] = None) -> Dataset:
    """Load a headered CSV; every column other than treatment and outcome is a covariate."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    for col in (treatment, outcome):
        if col not in header:
            raise ValidationError(f"{path}: no column named {col!r}")
    if covariates is None:
        covariates = [h for h in header if h not in (treatment, outcome)]
    missing = [c for c in covariates if c not in header]
    if missing:
        raise ValidationError(f"{path}: missing covariate columns {missing}")
    if not covariates:
        raise ValidationError(f"{path}: no covariate columns")
    pos = {h: j for j, h in enumerate(header)}
    values = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ValidationError(f"{path}: row {i + 1} has {len(row)} fields, expected {len(header)}")
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise ValidationError(
                    f"{path}: row {i + 1}, column {header[j]!r} is not numeric: {cell!r}"
                ) from None
    X = values[:, [pos[c] for c in covariates]]
    return Dataset(X, values[:, pos[treatment]], values[:, pos[outcome]], tuple(covariates))


def write_dataset_csv(path, data: Dataset, treatment: str = "A", outcome: str = "Y") -> None:
    names = list(data.column_names or [f"x{j + 1}" for j in range(data.p)])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names + [treatment, outcome])
        for i in range(data.n):
            writer.writerow([repr(float(v)) for v in data.X[i]] + [repr(float(data.A[i])), repr(float(data.Y[i]))])


def write_weights_csv(path, w: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("weight\n")
        for v in np.asarray(w, dtype=np.float64):
            fh.write(repr(float(v)) + "\n")


def read_weights_csv(path, n: Optional[int] = None) -> np.ndarray:
    """One weight per line, optional header. With ``n``, the length must match."""
    with open(path, newline="") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if lines and not _is_number(lines[0].split(",")[0]):
        lines = lines[1:]
    try:
        w = np.array([float(ln.split(",")[0]) for ln in lines])
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    if n is not None and w.size != n:
        raise ValidationError(f"{path}: has {w.size} weights but the data have {n} rows")
    return w


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def write_column_csv(path, name: str, values) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(name + "\n")
        for v in values:
            fh.write(repr(float(v)) + "\n")


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def ensure_dir(path) -> None:
    os.makedirs(path, exist_ok=True)
