"""Error metrics, target statistics and the cross-validation report."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

REPORT_VERSION = 1


def mse(predictions, truths) -> float:
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    t = np.asarray(truths, dtype=np.float64).reshape(-1)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape[0]} predictions vs {t.shape[0]} truths")
    if p.shape[0] == 0:
        raise ValueError("mse of an empty vector")
    return float(np.mean((p - t) ** 2))


def baseline_mse(targets) -> float:
    """MSE of predicting the target mean for everyone (population variance)."""
    t = np.asarray(targets, dtype=np.float64).reshape(-1)
    if t.shape[0] == 0:
        raise ValueError("baseline of an empty vector")
    return mse(np.full_like(t, t.mean()), t)


def dataset_stats(targets) -> tuple[float, float]:
    """Population mean and standard deviation."""
    t = np.asarray(targets, dtype=np.float64).reshape(-1)
    if t.shape[0] < 2:
        raise ValueError("dataset_stats needs at least 2 values")
    return float(t.mean()), float(t.std())


@dataclass
class CvReport:
    per_fold_mse: list
    pooled_mse: float
    fold_stats: list  # [(target mean, target std)] per test fold
    baseline_mse: float
    config_digest: str
    fold_sizes: list = field(default_factory=list)
    pipeline_digests: list = field(default_factory=list)
    model_rows: list = field(default_factory=list)  # [(label, pooled mse)]
    format_version: int = REPORT_VERSION

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fold_stats"] = [list(s) for s in self.fold_stats]
        d["model_rows"] = [list(r) for r in self.model_rows]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> CvReport:
        if d.get("format_version") != REPORT_VERSION:
            raise ValueError(f"unsupported report version {d.get('format_version')!r}")
        d = dict(d)
        d["fold_stats"] = [tuple(s) for s in d["fold_stats"]]
        d["model_rows"] = [tuple(r) for r in d.get("model_rows", [])]
        return cls(**d)

    def format_table(self) -> str:
        """Two-column Model / MSE table (baseline first, StackNet last)."""
        rows = [("Baseline", self.baseline_mse), *self.model_rows]
        if not any(label == "StackNet" for label, _ in self.model_rows):
            rows.append(("StackNet", self.pooled_mse))
        width = max(len("Model"), *(len(label) for label, _ in rows))
        lines = [f"{'Model':<{width}}  {'MSE':>10}", "-" * (width + 12)]
        lines += [f"{label:<{width}}  {value:>10.2f}" for label, value in rows]
        return "\n".join(lines)

    def format_folds(self) -> str:
        lines = [f"{'fold':>4}  {'n':>5}  {'mean':>8}  {'std':>8}  {'MSE':>10}"]
        sizes = self.fold_sizes or [""] * len(self.per_fold_mse)
        for i, (err, (mu, sd), size) in enumerate(zip(self.per_fold_mse, self.fold_stats, sizes)):
            lines.append(f"{i:>4}  {size:>5}  {mu:>8.3f}  {sd:>8.3f}  {err:>10.4f}")
        lines.append(f"pooled MSE {self.pooled_mse:.4f}   baseline {self.baseline_mse:.4f}")
        return "\n".join(lines)
