"""CSV ingestion and pre-fit data checks."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .types import Dataset

NEGATIVE_CORRELATION_THRESHOLD = -0.50


def load_csv(path, shift: int = 0) -> Dataset:
    """Read a header row of names and a body of non-negative integer cells.

    ``shift`` is subtracted from every cell first (e.g. 1 for Likert items
    coded from 1).
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataError(f"{path} is empty")
    names = [h.strip() for h in rows[0]]
    if len(rows) < 2:
        raise DataError(f"{path} has a header but no data rows")
    values = np.empty((len(rows) - 1, len(names)), dtype=np.int64)
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != len(names):
            raise DataError(f"row {i} has {len(row)} cells, expected {len(names)}; "
                            "missing values must be imputed before fitting")
        for j, cell in enumerate(row):
            cell = cell.strip()
            where = f"row {i}, column {names[j]!r}"
            if cell == "" or cell.upper() in ("NA", "NAN"):
                raise DataError(f"missing value at {where}; impute missing data before fitting")
            try:
                v = int(cell)
            except ValueError:
                raise DataError(f"non-integer value {cell!r} at {where}") from None
            v -= shift
            if v < 0:
                raise DataError(f"negative values in the data: {v} at {where}")
            values[i - 1, j] = v
    return Dataset(values, tuple(names))


@dataclass
class DataCheck:
    warnings: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    zero_fraction: dict[str, float] = field(default_factory=dict)
    max_value: dict[str, int] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "warnings": self.warnings,
            "notes": self.notes,
            "zero_fraction": self.zero_fraction,
            "max_value": self.max_value,
        }


def check_data(d: Dataset) -> DataCheck:
    """Flag strongly negative correlations, which the additive model cannot express."""
    out = DataCheck()
    x = d.values.astype(float)
    sd = x.std(axis=0)
    for j, name in enumerate(d.names):
        out.zero_fraction[name] = float(np.mean(d.values[:, j] == 0))
        out.max_value[name] = int(d.values[:, j].max())
        if sd[j] == 0:
            out.notes.append(f"column {name!r} is constant; its correlations are undefined")
    centered = x - x.mean(axis=0)
    for a in range(d.N):
        for b in range(a + 1, d.N):
            if sd[a] == 0 or sd[b] == 0:
                continue
            rho = float(np.mean(centered[:, a] * centered[:, b]) / (sd[a] * sd[b]))
            if rho < NEGATIVE_CORRELATION_THRESHOLD:
                out.warnings.append(
                    f"highly negative correlation ({rho:.2f}) between {d.names[a]!r} and "
                    f"{d.names[b]!r}, so the findings may not be stable")
    return out
