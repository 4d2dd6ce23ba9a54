"""Loading run metrics CSVs into labeled multi-seed series."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


class SchemaError(ValueError):
    """A metrics CSV is missing a required column."""


@dataclass
class RunSeries:
    """One plotted series: a label and per-seed column arrays.

    `columns` maps a column name to a (n_seeds, n_epochs) array, truncated
    to the shortest run so seeds stay aligned.
    """
    label: str
    paths: list
    columns: dict = field(default_factory=dict)

    def mean(self, name: str) -> np.ndarray:
        return self.columns[name].mean(axis=0)

    def band(self, name: str):
        col = self.columns[name]
        return col.min(axis=0), col.max(axis=0)


def _read_csv(path: str) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return {name: np.array([float(r[name]) for r in rows])
            for name in rows[0]}


def load_series(label: str, paths, required=()) -> RunSeries:
    """Read one or more per-seed CSVs sharing the metrics schema."""
    if not paths:
        raise SchemaError(f"series {label!r}: no CSV paths")
    tables = [_read_csv(p) for p in paths]
    for path, table in zip(paths, tables):
        for name in required:
            if name not in table:
                raise SchemaError(f"{path}: missing column {name!r}")
    n = min(next(iter(t.values())).shape[0] for t in tables)
    shared = set.intersection(*(set(t) for t in tables))
    columns = {name: np.stack([t[name][:n] for t in tables])
               for name in shared}
    return RunSeries(label=label, paths=list(paths), columns=columns)
