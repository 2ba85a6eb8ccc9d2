"""Built-in datasets and CSV ingestion."""

from __future__ import annotations

import csv
import io

import numpy as np

from .errors import UsageError
from .model import Dataset

__all__ = ["stackloss", "builtin_names", "load_builtin", "load_csv", "read_csv_text"]

# Brownlee's stack-loss plant data: 21 days of operation of a plant
# oxidising ammonia to nitric acid.
_STACKLOSS_AIR = [80, 80, 75, 62, 62, 62, 62, 62, 58, 58, 58,
                  58, 58, 58, 50, 50, 50, 50, 50, 56, 70]
_STACKLOSS_WATER = [27, 27, 25, 24, 22, 23, 24, 24, 23, 18, 18,
                    17, 18, 19, 18, 18, 19, 19, 20, 20, 20]
_STACKLOSS_ACID = [89, 88, 90, 87, 87, 87, 93, 93, 87, 80, 89,
                   88, 82, 93, 89, 86, 72, 79, 80, 82, 91]
_STACKLOSS_LOSS = [42, 37, 37, 28, 18, 18, 19, 20, 15, 14, 14,
                   13, 11, 12, 8, 7, 8, 8, 9, 15, 15]


def stackloss() -> Dataset:
    """The stack-loss data: 21 rows, covariates Air.Flow, Water.Temp, Acid.Conc."""
    X = np.column_stack([
        np.array(_STACKLOSS_AIR, float),
        np.array(_STACKLOSS_WATER, float),
        np.array(_STACKLOSS_ACID, float),
    ])
    return Dataset(np.array(_STACKLOSS_LOSS, float), X,
                   ("Air.Flow", "Water.Temp", "Acid.Conc"), "stack.loss")


_BUILTINS = {"stackloss": stackloss}


def builtin_names() -> list[str]:
    return sorted(_BUILTINS)


def load_builtin(name: str) -> Dataset:
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise UsageError(
            f"unknown built-in dataset {name!r}; available: "
            f"{', '.join(builtin_names())}") from None


def read_csv_text(text: str, response: str, source: str = "<csv>") -> Dataset:
    """Parse RFC-4180 CSV text with a header row into a Dataset.

    ``response`` names the response column; every other column is a
    covariate.  Malformed cells are reported with 1-based row/column
    coordinates (the header is row 1).
    """
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        raise UsageError(f"{source}: empty CSV")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise UsageError(f"{source}: duplicate column names in header")
    if response not in header:
        raise UsageError(
            f"{source}: response column {response!r} not found; "
            f"columns are {', '.join(header)}")
    y_col = header.index(response)
    cov_cols = [j for j in range(len(header)) if j != y_col]
    if not cov_cols:
        raise UsageError(f"{source}: no covariate columns besides the response")
    data = np.empty((len(rows) - 1, len(header)))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise UsageError(
                f"{source}: row {i} has {len(row)} cells, expected {len(header)}")
        for j, cell in enumerate(row):
            try:
                data[i - 2, j] = float(cell)
            except ValueError:
                raise UsageError(
                    f"{source}: non-numeric cell {cell!r} at row {i}, "
                    f"column {j + 1} ({header[j]})") from None
    return Dataset(data[:, y_col], data[:, cov_cols],
                   tuple(header[j] for j in cov_cols), response)


def load_csv(path: str, response: str) -> Dataset:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    return read_csv_text(text, response, source=path)
