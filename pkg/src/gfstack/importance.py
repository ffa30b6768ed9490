"""Per-feature importance obtained by pushing component F values back through PCA."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal

import numpy as np

from .preprocess import FittedPipeline


@dataclass(frozen=True)
class ImportanceVector:
    names: tuple
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        values.setflags(write=False)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "values", values)
        if len(self.names) != values.shape[0]:
            raise ValueError("names and values differ in length")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["name", "importance"])
            for name, value in zip(self.names, self.values):
                writer.writerow([name, repr(float(value))])


def importance_matrix(f_values, eigenvalues, components) -> np.ndarray:
    """p x K matrix whose column k is (normalised F_k)(normalised lambda_k) u_k."""
    f = np.asarray(f_values, dtype=np.float64)
    lam = np.asarray(eigenvalues, dtype=np.float64)
    f = f / f.max()  # sentinel-sized F values would otherwise overflow the sum
    return np.asarray(components, dtype=np.float64) * ((f / f.sum()) * (lam / lam.sum()))


def compute_importance(pipeline: FittedPipeline, names=None) -> ImportanceVector:
    sel = pipeline.selector.selected
    if sel.shape[0] < 1:
        raise ValueError("pipeline selected no components")
    p = pipeline.pca.components.shape[0]
    names = tuple(names) if names is not None else tuple(f"f{j}" for j in range(p))
    f = pipeline.selector.f_values[sel]
    if not np.any(f > 0):
        warnings.warn("all selected F values are zero; importance is uniform", RuntimeWarning, stacklevel=2)
        return ImportanceVector(names, np.full(p, 100.0 / p))
    mat = importance_matrix(f, pipeline.pca.eigenvalues[sel], pipeline.pca.components[:, sel])
    raw = np.abs(mat).sum(axis=1)
    return ImportanceVector(names, 100.0 * raw / raw.sum())


def round2(value: float) -> Decimal:
    """Two-decimal rounding, ties to even, on the shortest decimal repr."""
    return Decimal(repr(float(value))).quantize(Decimal("0.01"), rounding=ROUND_HALF_EVEN)


def rank_report(iv: ImportanceVector, top: int = 10, bottom: int = 10):
    """``(top_rows, bottom_rows)`` of ``(name, Decimal)``; ties ordered by name."""
    p = len(iv.names)
    if top < 0 or bottom < 0 or top + bottom > p:
        raise ValueError(f"top + bottom = {top + bottom} exceeds {p} features")
    rows = list(zip(iv.names, iv.values.tolist()))
    desc = sorted(rows, key=lambda r: (-r[1], r[0]))
    asc = sorted(rows, key=lambda r: (r[1], r[0]))
    return (
        [(name, round2(v)) for name, v in desc[:top]],
        [(name, round2(v)) for name, v in asc[:bottom]],
    )


def format_rank_table(rows, title: str) -> str:
    width = max([len("Variable"), *(len(name) for name, _ in rows)])
    lines = [title, f"{'Variable':<{width}}  {'Importance':>10}", "-" * (width + 12)]
    lines += [f"{name:<{width}}  {str(value):>10}" for name, value in rows]
    return "\n".join(lines)
