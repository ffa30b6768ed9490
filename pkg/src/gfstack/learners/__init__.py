"""Base regressors behind one fit/predict contract, plus spec-driven construction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..table import SeededRng
from .base import Estimator
from .linear import BayesianRidge, KernelRidge, Ridge
from .trees import ExtraTrees, GradientBoosting, RandomForest, Tree, fit_cart

REGISTRY: dict[str, type] = {
    cls.kind: cls
    for cls in (Ridge, BayesianRidge, KernelRidge, RandomForest, ExtraTrees, GradientBoosting)
}

_RANDOMISED = {"random_forest", "extra_trees", "gradient_boosting"}

_LABELS = {
    "ridge": "Ridge",
    "bayesian_ridge": "BayesianRidge",
    "kernel_ridge": "KernelRidge",
    "random_forest": "RandomForestRegressor",
    "extra_trees": "ExtraTreesRegressor",
    "gradient_boosting": "GradientBoostingRegressor",
}


@dataclass(frozen=True)
class EstimatorSpec:
    kind: str
    hyperparams: dict = field(default_factory=dict)
    seed_stream: int | None = None

    def __post_init__(self):
        if self.kind not in REGISTRY:
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        hp = dict(self.hyperparams)
        if "alpha" in hp and not hp["alpha"] > 0:
            raise ValueError("alpha must be > 0")
        if "n_estimators" in hp and int(hp["n_estimators"]) < 1:
            raise ValueError("n_estimators must be >= 1")
        if "max_depth" in hp and int(hp["max_depth"]) < 1:
            raise ValueError("max_depth must be >= 1")
        if "min_samples_leaf" in hp and int(hp["min_samples_leaf"]) < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        object.__setattr__(self, "hyperparams", hp)

    @property
    def label(self) -> str:
        """Display name such as ``RandomForestRegressor(n_estimators=1000, max_depth=7)``."""
        keys = [k for k in ("alpha", "n_estimators", "max_depth") if k in self.hyperparams]
        name = _LABELS.get(self.kind) or REGISTRY[self.kind].__name__
        if not keys:
            return name
        fmt = lambda v: f"{v:g}" if isinstance(v, float) else str(v)
        return f"{name}({', '.join(f'{k}={fmt(self.hyperparams[k])}' for k in keys)})"

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "hyperparams": dict(self.hyperparams)}
        if self.seed_stream is not None:
            d["seed_stream"] = self.seed_stream
        return d

    @classmethod
    def from_dict(cls, d: dict) -> EstimatorSpec:
        return cls(d["kind"], dict(d.get("hyperparams", {})), d.get("seed_stream"))

    def scaled(self, factor: float) -> EstimatorSpec:
        """Copy with ``n_estimators`` multiplied by ``factor`` (at least 1)."""
        if "n_estimators" not in self.hyperparams:
            return self
        hp = dict(self.hyperparams)
        hp["n_estimators"] = max(1, int(round(hp["n_estimators"] * factor)))
        return EstimatorSpec(self.kind, hp, self.seed_stream)


def build_estimator(spec: EstimatorSpec, rng: SeededRng | None = None) -> Estimator:
    cls = REGISTRY[spec.kind]
    if spec.kind in _RANDOMISED:
        return cls(**spec.hyperparams, rng=rng if rng is not None else SeededRng(0))
    return cls(**spec.hyperparams)


def fit_estimator(spec: EstimatorSpec, X, y, rng: SeededRng | None = None) -> Estimator:
    est = build_estimator(spec, rng)
    est.fit(X, y)
    est.spec = spec
    return est


def predict(est: Estimator, X) -> np.ndarray:
    return est.predict(X)


def estimator_to_dict(est: Estimator) -> dict:
    spec = getattr(est, "spec", None) or EstimatorSpec(est.kind, est.hyperparams())
    return {
        "spec": spec.to_dict(),
        "train_shape": list(est.train_shape) if est.train_shape is not None else None,
        "params": est.params_dict(),
    }


def estimator_from_dict(d: dict) -> Estimator:
    spec = EstimatorSpec.from_dict(d["spec"])
    est = build_estimator(spec)
    est.load_params(d["params"])
    est.spec = spec
    if d.get("train_shape") is not None:
        est.train_shape_ = tuple(d["train_shape"])
    return est


def fit_ridge(X, y, alpha):
    return Ridge(alpha).fit(X, y)


def fit_bayesian_ridge(X, y, max_iter=300, tol=1e-3):
    return BayesianRidge(max_iter=max_iter, tol=tol).fit(X, y)


def fit_kernel_ridge(X, y, alpha, kernel="linear"):
    return KernelRidge(alpha, kernel).fit(X, y)


def fit_random_forest(X, y, n_estimators, max_depth, rng, **kw):
    return RandomForest(n_estimators, max_depth, rng=rng, **kw).fit(X, y)


def fit_extra_trees(X, y, n_estimators, max_depth, rng, **kw):
    return ExtraTrees(n_estimators, max_depth, rng=rng, **kw).fit(X, y)


def fit_gradient_boosting(X, y, n_estimators, max_depth, learning_rate=0.1, **kw):
    return GradientBoosting(n_estimators, max_depth, learning_rate, **kw).fit(X, y)


__all__ = [
    "REGISTRY",
    "BayesianRidge",
    "Estimator",
    "EstimatorSpec",
    "ExtraTrees",
    "GradientBoosting",
    "KernelRidge",
    "RandomForest",
    "Ridge",
    "Tree",
    "build_estimator",
    "estimator_from_dict",
    "estimator_to_dict",
    "fit_bayesian_ridge",
    "fit_cart",
    "fit_estimator",
    "fit_extra_trees",
    "fit_gradient_boosting",
    "fit_kernel_ridge",
    "fit_random_forest",
    "fit_ridge",
    "predict",
]
