"""Shared estimator contract and input checks."""

from __future__ import annotations

import numpy as np

from ..table import DataError


def check_X(X, n_features=None) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1 and X.shape[0] == 0:
        X = X.reshape(0, n_features or 0)
    if X.ndim != 2:
        raise DataError(f"expected a 2-D matrix, got shape {X.shape}")
    if n_features is not None and X.shape[1] != n_features:
        raise DataError(f"expected {n_features} columns, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise DataError("inputs must be finite")
    return X


def check_Xy(X, y, min_rows=1):
    X = check_X(X)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise DataError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    if X.shape[0] < min_rows:
        raise DataError(f"need at least {min_rows} rows, got {X.shape[0]}")
    if not np.all(np.isfinite(y)):
        raise DataError("targets must be finite")
    return X, y


class Estimator:
    """fit/predict regressor with a JSON-friendly parameter dump.

    Subclasses set ``kind`` and implement ``fit``, ``predict``,
    ``hyperparams``, ``params_dict`` and ``load_params``.
    """

    kind = "abstract"

    def hyperparams(self) -> dict:
        raise NotImplementedError

    def params_dict(self) -> dict:
        raise NotImplementedError

    def load_params(self, d: dict) -> None:
        raise NotImplementedError

    @property
    def train_shape(self):
        return getattr(self, "train_shape_", None)

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.hyperparams().items())
        return f"{type(self).__name__}({args})"
