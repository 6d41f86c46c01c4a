"""CSV ingestion with a drop-row policy for missing values."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .exceptions import DataError

logger = logging.getLogger(__name__)


class EmptyResultError(DataError):
    """No complete rows remain after parsing."""


@dataclass(frozen=True)
class Dataset:
    columns: tuple
    values: np.ndarray
    source: str
    n_read: int
    n_dropped: int

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]


def ingest_csv(path, columns=None) -> Dataset:
    """Read numeric columns from a CSV file with a header row.

    Parameters
    ----------
    path : str or Path
    columns : sequence of str, optional
        Columns to keep, in order. Defaults to every column.

    Rows with a missing value in any selected column are dropped and
    counted. Cells that are neither numeric nor a recognised missing-value
    marker raise :class:`DataError`.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=True)
    except FileNotFoundError as exc:
        raise DataError(f"cannot read {path}: no such file") from exc
    except pd.errors.EmptyDataError as exc:
        raise EmptyResultError(f"{path} has no header row") from exc
    if columns is None:
        columns = list(frame.columns)
    columns = [c.strip() for c in columns]
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise DataError(f"unknown column(s) {missing}; available: {list(frame.columns)}")

    frame = frame[columns]
    parsed = {}
    for col in columns:
        raw = frame[col]
        num = pd.to_numeric(raw.str.strip(), errors="coerce")
        bad = num.isna() & raw.notna()
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            # +2: header line and 1-based numbering
            raise DataError(f"non-numeric value {raw.iloc[row]!r} in column {col!r} at line {row + 2}")
        parsed[col] = num.astype(float)
    numeric = pd.DataFrame(parsed)
    complete = numeric.notna().all(axis=1) & np.isfinite(numeric).all(axis=1)
    values = numeric[complete].to_numpy(dtype=float)
    n_dropped = int((~complete).sum())
    if n_dropped:
        logger.info("dropped %d incomplete rows from %s", n_dropped, path)
    if len(values) == 0:
        raise EmptyResultError(f"no complete rows in {path}")
    return Dataset(tuple(columns), values, str(path), len(numeric), n_dropped)
