"""Datasets of bivariate (or n-variate) lifetimes and their CSV form.

CSV layout: a header row, the coordinate columns (``r,s`` then ``x3, ...``)
and an optional ``is_singular`` column holding 0/1. Floats are written with
``repr`` so every value round-trips exactly.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, NmoError


class DataFormatError(NmoError, ValueError):
    """Malformed CSV input. ``line`` is the 1-based line number, if known."""

    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass
class Dataset:
    """Bivariate observations with an optional known-singular flag per row."""

    r: np.ndarray
    s: np.ndarray
    is_singular: np.ndarray | None = None
    names: tuple[str, str] = ("r", "s")

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float).ravel()
        self.s = np.asarray(self.s, dtype=float).ravel()
        if self.r.shape != self.s.shape:
            raise DomainError("r and s must have the same length")
        if self.r.size < 1:
            raise DomainError("a dataset needs at least one row")
        if not (np.all(np.isfinite(self.r)) and np.all(np.isfinite(self.s))):
            raise DomainError("coordinates must be finite")
        if np.any(self.r < 0) or np.any(self.s < 0):
            raise DomainError("coordinates must be non-negative")
        if self.is_singular is not None:
            self.is_singular = np.asarray(self.is_singular, dtype=bool).ravel()
            if self.is_singular.shape != self.r.shape:
                raise DomainError("is_singular must have one entry per row")

    @property
    def m(self) -> int:
        return int(self.r.size)

    @property
    def has_flags(self) -> bool:
        return self.is_singular is not None

    def without_flags(self) -> "Dataset":
        return Dataset(self.r.copy(), self.s.copy(), None, self.names)

    def scaled(self, c: float) -> "Dataset":
        flags = None if self.is_singular is None else self.is_singular.copy()
        return Dataset(self.r * c, self.s * c, flags, self.names)

    def swapped(self) -> "Dataset":
        flags = None if self.is_singular is None else self.is_singular.copy()
        return Dataset(self.s.copy(), self.r.copy(), flags, self.names[::-1])

    def __len__(self):
        return self.m


@dataclass
class MultiDataset:
    """n-variate observations with one boundary flag per unordered pair."""

    x: np.ndarray
    pair_flags: np.ndarray
    pairs: list = field(default_factory=list)

    @property
    def m(self) -> int:
        return int(self.x.shape[0])

    @property
    def n(self) -> int:
        return int(self.x.shape[1])


def _column_names(n: int) -> list[str]:
    return ["r", "s"] + [f"x{j}" for j in range(3, n + 1)]


def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv(path, columns: Sequence[np.ndarray], names: Sequence[str],
              flags: np.ndarray | None = None) -> None:
    header = list(names) + (["is_singular"] if flags is not None else [])
    own = isinstance(path, (str, os.PathLike))
    fh = open(path, "w", newline="") if own else path
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        cols = [np.asarray(c, float) for c in columns]
        for i in range(cols[0].size):
            row = [_fmt(c[i]) for c in cols]
            if flags is not None:
                row.append("1" if flags[i] else "0")
            w.writerow(row)
    finally:
        if own:
            fh.close()


def write_dataset(path, data: Dataset | MultiDataset) -> None:
    if isinstance(data, MultiDataset):
        flags = data.pair_flags.any(axis=1) if data.pair_flags.size else np.zeros(data.m, bool)
        write_csv(path, [data.x[:, j] for j in range(data.n)], _column_names(data.n), flags)
    else:
        write_csv(path, [data.r, data.s], ["r", "s"], data.is_singular)


_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n"}


def read_dataset(path, columns: Sequence[str] | None = None) -> Dataset:
    """Read a bivariate dataset.

    Column choice: ``columns`` if given, else ``r`` and ``s`` when present,
    else the first two columns other than ``is_singular``.
    """
    own = isinstance(path, (str, os.PathLike))
    try:
        fh = open(path, newline="") if own else path
    except OSError:
        raise
    try:
        text = fh.read()
    finally:
        if own:
            fh.close()
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataFormatError("file is empty; a header row is required", line=1)
    header = [h.strip() for h in header]
    lower = [h.lower() for h in header]
    if columns is not None:
        if len(columns) != 2:
            raise DataFormatError("exactly two column names are required")
        try:
            idx = [header.index(c) for c in columns]
        except ValueError:
            raise DataFormatError(f"columns {list(columns)} not all present in header {header}", line=1)
    elif "r" in lower and "s" in lower:
        idx = [lower.index("r"), lower.index("s")]
    else:
        candidates = [i for i, h in enumerate(lower) if h != "is_singular"]
        if len(candidates) < 2:
            raise DataFormatError("need at least two data columns", line=1)
        idx = candidates[:2]
    flag_idx = lower.index("is_singular") if "is_singular" in lower else None

    rs, ss, flags = [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataFormatError(f"expected {len(header)} fields, found {len(row)}", line=lineno)
        vals = []
        for j in idx:
            cell = row[j].strip()
            try:
                v = float(cell)
            except ValueError:
                raise DataFormatError(f"column {header[j]!r}: {cell!r} is not a number", line=lineno)
            if not math.isfinite(v):
                raise DataFormatError(f"column {header[j]!r}: non-finite value {cell!r}", line=lineno)
            if v < 0:
                raise DataFormatError(f"column {header[j]!r}: negative value {cell!r} in row {lineno - 1}",
                                      line=lineno)
            vals.append(v)
        rs.append(vals[0])
        ss.append(vals[1])
        if flag_idx is not None:
            cell = row[flag_idx].strip().lower()
            if cell in _TRUE:
                flags.append(True)
            elif cell in _FALSE:
                flags.append(False)
            else:
                raise DataFormatError(f"is_singular: cannot parse {row[flag_idx]!r}", line=lineno)
    if not rs:
        raise DataFormatError("no data rows")
    return Dataset(np.array(rs), np.array(ss),
                   np.array(flags) if flag_idx is not None else None,
                   (header[idx[0]], header[idx[1]]))
