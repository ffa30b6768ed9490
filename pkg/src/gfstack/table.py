"""Feature tables, CSV I/O, seeded random streams and balanced fold plans."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

_U64 = (1 << 64) - 1


class DataError(ValueError):
    """Input data violates a precondition (bad cell, duplicate id, ...)."""


@dataclass(frozen=True)
class FeatureTable:
    """Subjects x named feature columns, with an optional regression target."""

    subject_ids: tuple
    columns: tuple
    values: np.ndarray
    target: np.ndarray | None = None
    target_name: str | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True, order="C")
        if values.ndim != 2:
            raise DataError("values must be a 2-D matrix")
        ids = tuple(str(s) for s in self.subject_ids)
        cols = tuple(str(c) for c in self.columns)
        n, p = values.shape
        if len(ids) != n:
            raise DataError(f"{len(ids)} subject ids for {n} rows")
        if len(cols) != p:
            raise DataError(f"{len(cols)} column names for {p} columns")
        if len(set(ids)) != n:
            raise DataError(f"duplicate subject id {_first_duplicate(ids)!r}")
        if len(set(cols)) != p:
            raise DataError(f"duplicate column name {_first_duplicate(cols)!r}")
        if not np.all(np.isfinite(values)):
            raise DataError("feature values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "subject_ids", ids)
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "values", values)
        if self.target is not None:
            target = np.array(self.target, dtype=np.float64, copy=True).reshape(-1)
            if target.shape[0] != n:
                raise DataError(f"target has length {target.shape[0]}, expected {n}")
            if not np.all(np.isfinite(target)):
                raise DataError("target values must be finite")
            target.setflags(write=False)
            object.__setattr__(self, "target", target)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def has_target(self) -> bool:
        return self.target is not None

    def take(self, rows) -> FeatureTable:
        rows = np.asarray(rows, dtype=np.int64)
        return FeatureTable(
            subject_ids=tuple(self.subject_ids[i] for i in rows),
            columns=self.columns,
            values=self.values[rows],
            target=None if self.target is None else self.target[rows],
            target_name=self.target_name,
        )

    def matrix_for(self, names, positional: bool = False) -> np.ndarray:
        """Feature matrix with columns arranged in ``names`` order.

        Alignment is by column name unless ``positional`` is set, in which case
        the names must match exactly in order.
        """
        names = tuple(names)
        if positional:
            if self.columns != names:
                for want, got in zip(names, self.columns):
                    if want != got:
                        raise DataError(f"column mismatch: expected {want!r}, found {got!r}")
                raise DataError(f"column count mismatch: expected {len(names)}, found {self.p}")
            return np.array(self.values)
        lookup = {c: j for j, c in enumerate(self.columns)}
        for name in names:
            if name not in lookup:
                raise DataError(f"column mismatch: missing column {name!r}")
        extra = [c for c in self.columns if c not in set(names)]
        if extra:
            raise DataError(f"column mismatch: unexpected column {extra[0]!r}")
        return self.values[:, [lookup[c] for c in names]]


def _first_duplicate(items):
    seen = set()
    for item in items:
        if item in seen:
            return item
        seen.add(item)
    return None


def load_csv(path, target_column: str | None = None) -> FeatureTable:
    """Read a comma-separated table whose first column holds subject ids."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        if len(header) < 2:
            raise DataError("header needs a subject id column and at least one value column")
        names = [h.strip() for h in header[1:]]
        if len(set(names)) != len(names):
            raise DataError(f"duplicate column name {_first_duplicate(names)!r}")
        if target_column is not None and target_column not in names:
            raise DataError(f"target column {target_column!r} not found")

        ids, rows = [], []
        for lineno, record in enumerate(reader, start=2):
            if not record or all(not cell.strip() for cell in record):
                continue
            if len(record) != len(header):
                raise DataError(f"row {lineno} has {len(record)} cells, expected {len(header)}")
            parsed = []
            for name, cell in zip(names, record[1:]):
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(f"non-numeric cell at row {lineno}, column {name}") from None
                if not math.isfinite(value):
                    raise DataError(f"non-finite cell at row {lineno}, column {name}")
                parsed.append(value)
            ids.append(record[0].strip())
            rows.append(parsed)

    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(names))
    if target_column is None:
        return FeatureTable(tuple(ids), tuple(names), values)
    t = names.index(target_column)
    keep = [j for j in range(len(names)) if j != t]
    return FeatureTable(
        subject_ids=tuple(ids),
        columns=tuple(names[j] for j in keep),
        values=values[:, keep],
        target=values[:, t],
        target_name=target_column,
    )


def write_csv(table: FeatureTable, path, id_header: str = "subject_id") -> None:
    """Write ``table`` so that :func:`load_csv` reads it back exactly."""
    header = [id_header, *table.columns]
    if table.target is not None:
        header.append(table.target_name or "target")
    with open(os.fspath(path), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i, sid in enumerate(table.subject_ids):
            row = [sid, *(repr(float(v)) for v in table.values[i])]
            if table.target is not None:
                row.append(repr(float(table.target[i])))
            writer.writerow(row)


class SeededRng:
    """Counter-based random stream keyed by ``(base_seed, stream_id)``.

    Backed by numpy's Philox generator, whose 128-bit key is exactly the pair
    of 64-bit integers, so every pair names an independent stream.
    """

    def __init__(self, base_seed: int, stream_id: int = 0):
        self.base_seed = int(base_seed) & _U64
        self.stream_id = int(stream_id) & _U64
        bitgen = np.random.Philox(key=np.array([self.base_seed, self.stream_id], dtype=np.uint64))
        self._gen = np.random.Generator(bitgen)

    def __repr__(self):
        return f"SeededRng(base_seed={self.base_seed}, stream_id={self.stream_id})"

    def child(self, stream_id: int) -> SeededRng:
        """Fresh stream for a sub-component; independent of this stream's state."""
        derived = (self.stream_id * 0x9E3779B97F4A7C15 + int(stream_id) + 1) & _U64
        return SeededRng(self.base_seed, _splitmix64(derived))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform(self, size=None):
        return self._gen.random(size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def integers(self, high, size=None):
        return self._gen.integers(0, high, size=size, dtype=np.int64)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def seed64(self) -> int:
        """One 64-bit draw, used to key in-kernel hash streams."""
        return int(self._gen.integers(0, 2**63 - 1, dtype=np.int64))


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _U64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _U64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.array(self.assignments, dtype=np.int64, copy=True)
        a.setflags(write=False)
        object.__setattr__(self, "assignments", a)

    @property
    def n(self) -> int:
        return self.assignments.shape[0]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)


def make_balanced_folds(targets, k: int, rng: SeededRng) -> FoldPlan:
    """Assign samples to ``k`` folds with matched target distributions.

    Samples are sorted by target and dealt out in consecutive groups of ``k``;
    each group goes to the folds in a freshly shuffled order, so every fold
    receives one sample from each quantile band.
    """
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    n = targets.shape[0]
    if k < 2:
        raise DataError(f"fold count must be >= 2, got {k}")
    if k > n:
        raise DataError(f"fold count {k} exceeds sample count {n}")
    if not np.all(np.isfinite(targets)):
        raise DataError("targets must be finite")
    order = np.argsort(targets, kind="stable")
    assignments = np.empty(n, dtype=np.int64)
    for start in range(0, n, k):
        group = order[start:start + k]
        assignments[group] = rng.permutation(k)[: group.shape[0]]
    return FoldPlan(k, assignments)


def split_indices(plan: FoldPlan, fold: int):
    """(train, test) index arrays for one fold, both ascending."""
    if not 0 <= fold < plan.k:
        raise IndexError(f"fold {fold} out of range for k={plan.k}")
    test = np.flatnonzero(plan.assignments == fold)
    train = np.flatnonzero(plan.assignments != fold)
    return train, test
