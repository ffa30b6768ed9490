"""Tabular regression with a restacking StackNet.

Pipeline: z-scoring, PCA with automatic (Minka) rank, variance filtering and
univariate F-test selection feed a layered stacked-generalisation ensemble of
linear and tree models. Feature importance is recovered by projecting the
selected components' F values back onto the original columns.
"""

from .harness import compare_models, model_cv, run_cv_experiment
from .importance import ImportanceVector, compute_importance, rank_report
from .metrics import CvReport, baseline_mse, dataset_stats, mse
from .preprocess import FittedPipeline, fit_pipeline, transform
from .stacknet import (
    StackNetConfig,
    TrainedStackNet,
    default_config,
    fit_stacknet,
    predict_stacknet,
    stacknet_cv,
)
from .table import FeatureTable, FoldPlan, SeededRng, load_csv, make_balanced_folds, split_indices, write_csv

__version__ = "0.1.0"

__all__ = [
    "CvReport",
    "FeatureTable",
    "FittedPipeline",
    "FoldPlan",
    "ImportanceVector",
    "SeededRng",
    "StackNetConfig",
    "TrainedStackNet",
    "baseline_mse",
    "compare_models",
    "compute_importance",
    "dataset_stats",
    "default_config",
    "fit_pipeline",
    "fit_stacknet",
    "load_csv",
    "make_balanced_folds",
    "model_cv",
    "mse",
    "predict_stacknet",
    "rank_report",
    "run_cv_experiment",
    "split_indices",
    "stacknet_cv",
    "transform",
    "write_csv",
]
