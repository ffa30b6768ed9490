"""Cross-validation experiments over the full preprocessing + StackNet pipeline."""

from __future__ import annotations

import hashlib
import logging

import numpy as np

from .learners import EstimatorSpec, fit_estimator
from .metrics import CvReport, baseline_mse, dataset_stats, mse
from .preprocess import DEFAULT_VARIANCE_THRESHOLD, fit_pipeline, transform
from .stacknet import (
    StackNetConfig,
    cv_plan,
    default_config,
    fit_stacknet,
    fold_rng,
    predict_stacknet,
    stacknet_cv,
)
from .table import DataError, FeatureTable, split_indices

logger = logging.getLogger(__name__)

__all__ = [
    "CvReport",
    "baseline_mse",
    "compare_models",
    "dataset_stats",
    "model_cv",
    "mse",
    "run_cv_experiment",
]


def _check_folds(n, k_folds):
    if k_folds < 2 or 2 * k_folds > n:
        raise DataError(f"k_folds={k_folds} needs 2 <= k_folds <= n/2 (n={n})")


def run_cv_experiment(
    table: FeatureTable,
    config: StackNetConfig | None = None,
    k_folds: int = 10,
    select_k: int = 24,
    seed: int = 0,
    paper_protocol: bool = False,
    variance_threshold: float = DEFAULT_VARIANCE_THRESHOLD,
    per_model: bool = False,
) -> CvReport:
    """k-fold MSE of preprocessing + StackNet on a labelled table.

    By default the preprocessing pipeline is refit on each fold's training
    rows. ``paper_protocol`` instead fits it once on every row before
    splitting, which lets test-fold statistics leak into feature selection.
    With ``per_model`` every constituent model is also scored alone on the
    same folds and listed in ``model_rows``.
    """
    if not table.has_target:
        raise DataError("cross-validation needs a target column")
    config = config if config is not None else default_config(seed)
    y = table.target
    _check_folds(table.n, k_folds)

    shared = fit_pipeline(table, select_k, variance_threshold) if paper_protocol else None
    plan = cv_plan(y, k_folds, seed)
    specs = config.specs() if per_model else []
    pred = np.empty_like(y)
    single = np.empty((y.shape[0], len(specs)))
    per_fold, stats, sizes, digests = [], [], [], []
    for f in range(k_folds):
        train, test = split_indices(plan, f)
        pipe = shared or fit_pipeline(table.take(train), select_k, variance_threshold)
        x_train = transform(pipe, table.values[train])
        x_test = transform(pipe, table.values[test])
        net = fit_stacknet(config, x_train, y[train], fold_rng(seed, f))
        pred[test] = predict_stacknet(net, x_test)
        for j, spec in enumerate(specs):
            est = fit_estimator(spec, x_train, y[train], fold_rng(seed, f).child(7))
            single[test, j] = est.predict(x_test)
        per_fold.append(mse(pred[test], y[test]))
        stats.append((float(y[test].mean()), float(y[test].std())))
        sizes.append(int(test.shape[0]))
        digests.append(pipe.digest())
        logger.info("fold %d/%d: MSE %.4f", f + 1, k_folds, per_fold[-1])

    pooled = mse(pred, y)
    rows = [(spec.label, mse(single[:, j], y)) for j, spec in enumerate(specs)]
    if rows:
        rows.append(("StackNet", pooled))
    key = f"{config.digest()}:{k_folds}:{select_k}:{seed}:{int(paper_protocol)}:{variance_threshold!r}"
    return CvReport(
        per_fold_mse=per_fold,
        pooled_mse=pooled,
        fold_stats=stats,
        baseline_mse=baseline_mse(y),
        config_digest=hashlib.sha256(key.encode()).hexdigest(),
        fold_sizes=sizes,
        pipeline_digests=digests,
        model_rows=rows,
    )


def model_cv(spec: EstimatorSpec, X, y, k_folds: int = 10, seed: int = 0) -> tuple[float, np.ndarray]:
    """Pooled k-fold MSE of one estimator on the same folds :func:`stacknet_cv` uses.

    Returns ``(pooled_mse, out_of_fold_predictions)``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    _check_folds(y.shape[0], k_folds)
    plan = cv_plan(y, k_folds, seed)
    pred = np.empty_like(y)
    for f in range(k_folds):
        train, test = split_indices(plan, f)
        est = fit_estimator(spec, X[train], y[train], fold_rng(seed, f).child(7))
        pred[test] = est.predict(X[test])
    return mse(pred, y), pred


def compare_models(config: StackNetConfig, X, y, k_folds: int = 10, seed: int = 0) -> CvReport:
    """StackNet CV report whose ``model_rows`` also list every constituent model alone."""
    report = stacknet_cv(config, X, y, k_folds, seed)
    rows = []
    for spec in config.specs():
        pooled, _ = model_cv(spec, X, y, k_folds, seed)
        rows.append((spec.label, pooled))
    rows.append(("StackNet", report.pooled_mse))
    report.model_rows = rows
    return report
