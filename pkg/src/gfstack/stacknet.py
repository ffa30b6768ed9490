"""Multi-layer stacked generalisation with restacking.

Each layer's models are trained against the final target. Their out-of-fold
predictions become extra input columns for the next layer (appended to all
earlier columns in restack mode, replacing them otherwise). At inference the
same wiring is replayed with models refit on the full accumulated input.

Random streams: the out-of-fold plan of layer ``l`` uses ``rng.child(l)``;
model ``m`` of layer ``l`` uses ``rng.child(spec.seed_stream)`` or, when
unset, ``rng.child(1000 * (l + 1) + m)``. Within a model stream, child 0 is
the full refit and child ``f + 1`` the copy trained without fold ``f``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .learners import EstimatorSpec, estimator_from_dict, estimator_to_dict, fit_estimator
from .metrics import CvReport, baseline_mse, mse
from .table import DataError, FoldPlan, SeededRng, make_balanced_folds, split_indices

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass(frozen=True)
class StackNetConfig:
    layers: tuple
    restack: bool = True
    oof_folds: int = 5
    seed: int = 0

    def __post_init__(self):
        layers = tuple(tuple(layer) for layer in self.layers)
        if not layers:
            raise ValueError("a StackNet needs at least one layer")
        if any(len(layer) == 0 for layer in layers):
            raise ValueError("every layer needs at least one model")
        if self.oof_folds < 2:
            raise ValueError("oof_folds must be >= 2")
        object.__setattr__(self, "layers", layers)
        if len(layers[-1]) != 1:
            warnings.warn(
                f"final layer has {len(layers[-1])} models; their outputs will be averaged",
                UserWarning,
                stacklevel=3,
            )

    @property
    def n_models(self) -> int:
        return sum(len(layer) for layer in self.layers)

    def specs(self):
        return [spec for layer in self.layers for spec in layer]

    def to_dict(self) -> dict:
        return {
            "layers": [[spec.to_dict() for spec in layer] for layer in self.layers],
            "restack": self.restack,
            "oof_folds": self.oof_folds,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> StackNetConfig:
        return cls(
            layers=[[EstimatorSpec.from_dict(s) for s in layer] for layer in d["layers"]],
            restack=bool(d.get("restack", True)),
            oof_folds=int(d.get("oof_folds", 5)),
            seed=int(d.get("seed", 0)),
        )

    @classmethod
    def from_json(cls, path) -> StackNetConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def scaled(self, factor: float) -> StackNetConfig:
        """Same wiring with every ``n_estimators`` multiplied by ``factor``."""
        layers = [[spec.scaled(factor) for spec in layer] for layer in self.layers]
        return StackNetConfig(layers, self.restack, self.oof_folds, self.seed)


def _rf(n, depth):
    return EstimatorSpec("random_forest", {"n_estimators": n, "max_depth": depth})


def _et(n, depth):
    return EstimatorSpec("extra_trees", {"n_estimators": n, "max_depth": depth})


def default_config(seed: int = 0) -> StackNetConfig:
    """Three layers, eleven models; linear model on every layer."""
    layer1 = [
        EstimatorSpec("bayesian_ridge"),
        _rf(1000, 7),
        _rf(1000, 9),
        _rf(800, 11),
        _et(1800, 9),
        _et(2200, 11),
        EstimatorSpec("gradient_boosting", {"n_estimators": 40, "max_depth": 3, "learning_rate": 0.1}),
    ]
    layer2 = [
        EstimatorSpec("kernel_ridge", {"alpha": 512.0, "kernel": "linear"}),
        _rf(800, 13),
        _et(3200, 15),
    ]
    layer3 = [EstimatorSpec("ridge", {"alpha": 512.0})]
    return StackNetConfig([layer1, layer2, layer3], restack=True, oof_folds=5, seed=seed)


@dataclass
class TrainedStackNet:
    config: StackNetConfig
    fitted_layers: list
    input_width: int
    oof_assignments: list = field(default_factory=list)  # per layer, fold index per training row
    oof_meta: list = field(default_factory=list, repr=False)  # per layer, n x models (not serialised)

    @property
    def layer_widths(self) -> list:
        """Input width seen by each layer's models."""
        return [layer[0].train_shape[1] for layer in self.fitted_layers]

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "input_width": self.input_width,
            "layers": [[estimator_to_dict(est) for est in layer] for layer in self.fitted_layers],
            "oof_assignments": [np.asarray(a).tolist() for a in self.oof_assignments],
        }

    @classmethod
    def from_dict(cls, d: dict) -> TrainedStackNet:
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported stacknet version {d.get('format_version')!r}")
        return cls(
            config=StackNetConfig.from_dict(d["config"]),
            fitted_layers=[[estimator_from_dict(e) for e in layer] for layer in d["layers"]],
            input_width=int(d["input_width"]),
            oof_assignments=[np.array(a, dtype=np.int64) for a in d.get("oof_assignments", [])],
        )


def _model_stream(spec: EstimatorSpec, layer: int, index: int) -> int:
    return spec.seed_stream if spec.seed_stream is not None else 1000 * (layer + 1) + index


def fit_stacknet(config: StackNetConfig, X, y, rng: SeededRng | None = None) -> TrainedStackNet:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = X.shape[0]
    if y.shape[0] != n:
        raise DataError("X and y disagree on row count")
    if n < 2 * config.oof_folds:
        raise DataError(f"need at least {2 * config.oof_folds} rows for {config.oof_folds} OOF folds")
    rng = rng if rng is not None else SeededRng(config.seed)

    accumulated = X
    fitted_layers, assignments, metas = [], [], []
    for li, layer in enumerate(config.layers):
        plan = make_balanced_folds(y, config.oof_folds, rng.child(li))
        folds = [split_indices(plan, f) for f in range(plan.k)]
        meta = np.empty((n, len(layer)))
        fitted = []
        for mi, spec in enumerate(layer):
            model_rng = rng.child(_model_stream(spec, li, mi))
            for f, (train, test) in enumerate(folds):
                est = fit_estimator(spec, accumulated[train], y[train], model_rng.child(f + 1))
                meta[test, mi] = est.predict(accumulated[test])
            fitted.append(fit_estimator(spec, accumulated, y, model_rng.child(0)))
            logger.debug("layer %d model %s fitted on width %d", li, spec.label, accumulated.shape[1])
        fitted_layers.append(fitted)
        assignments.append(plan.assignments)
        metas.append(meta)
        accumulated = np.hstack([accumulated, meta]) if config.restack else meta
    return TrainedStackNet(config, fitted_layers, X.shape[1], assignments, metas)


def predict_stacknet(model: TrainedStackNet, X) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1 and X.shape[0] == 0:
        X = X.reshape(0, model.input_width)
    if X.ndim != 2 or X.shape[1] != model.input_width:
        raise DataError(f"expected {model.input_width} input columns, got shape {X.shape}")
    if X.shape[0] == 0:
        return np.empty(0)
    accumulated = X
    for layer in model.fitted_layers:
        cols = np.column_stack([est.predict(accumulated) for est in layer])
        accumulated = np.hstack([accumulated, cols]) if model.config.restack else cols
    return cols.mean(axis=1) if cols.shape[1] > 1 else cols[:, 0].copy()


def cv_plan(y, k_folds: int, seed: int) -> FoldPlan:
    """Outer fold plan used by every cross-validation driver (stream 1 of ``seed``)."""
    return make_balanced_folds(y, k_folds, SeededRng(seed, 1))


def fold_rng(seed: int, fold: int) -> SeededRng:
    return SeededRng(seed).child(1000 + fold)


def stacknet_cv(config: StackNetConfig, X, y, k_folds: int = 10, seed: int | None = None) -> CvReport:
    """Balanced k-fold estimate of StackNet error on preprocessed features."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    seed = config.seed if seed is None else seed
    if k_folds < 2 or 2 * k_folds > y.shape[0]:
        raise DataError(f"k_folds={k_folds} needs 2 <= k_folds <= n/2 (n={y.shape[0]})")
    plan = cv_plan(y, k_folds, seed)
    pred = np.empty_like(y)
    per_fold, stats, sizes = [], [], []
    for f in range(k_folds):
        train, test = split_indices(plan, f)
        net = fit_stacknet(config, X[train], y[train], fold_rng(seed, f))
        pred[test] = predict_stacknet(net, X[test])
        per_fold.append(mse(pred[test], y[test]))
        stats.append((float(y[test].mean()), float(y[test].std())))
        sizes.append(int(test.shape[0]))
    digest = hashlib.sha256(f"{config.digest()}:{k_folds}:{seed}".encode()).hexdigest()
    return CvReport(
        per_fold_mse=per_fold,
        pooled_mse=mse(pred, y),
        fold_stats=stats,
        baseline_mse=baseline_mse(y),
        config_digest=digest,
        fold_sizes=sizes,
    )
