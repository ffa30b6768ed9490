"""CART regression trees and the tree ensembles built from them."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import _accel
from ..table import SeededRng
from . import _kernels as K
from .base import Estimator, check_X, check_Xy


@dataclass(frozen=True)
class Tree:
    """Flat preorder node arrays; ``feature == -1`` marks a leaf.

    The left child of internal node ``i`` is always ``i + 1``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    depth: np.ndarray

    @property
    def node_count(self) -> int:
        return self.feature.shape[0]

    @property
    def max_depth(self) -> int:
        return int(self.depth.max())

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if _accel.use_numba():
            return K.predict_tree_nb(X, self.feature, self.threshold, self.left, self.right, self.value)
        return K.predict_tree_np(X, self.feature, self.threshold, self.left, self.right, self.value)

    def apply(self, X) -> np.ndarray:
        return K.apply_tree_np(np.asarray(X, dtype=np.float64), self.feature, self.threshold, self.left, self.right)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> Tree:
        feature = np.array(d["feature"], dtype=np.int64)
        right = np.array(d["right"], dtype=np.int64)
        n = feature.shape[0]
        internal = feature >= 0
        left = np.where(internal, np.arange(n) + 1, -1)
        depth = np.zeros(n, dtype=np.int64)
        for i in np.flatnonzero(internal):
            depth[i + 1] = depth[i] + 1
            depth[right[i]] = depth[i] + 1
        return cls(
            feature,
            np.array(d["threshold"], dtype=np.float64),
            left,
            right,
            np.array(d["value"], dtype=np.float64),
            np.array(d["n_samples"], dtype=np.int64),
            depth,
        )


def fit_cart(
    X,
    y,
    max_depth: int,
    min_samples_leaf: int = 1,
    max_features: int | None = None,
    random_thresholds: bool = False,
    seed: int = 0,
    samples=None,
    order=None,
) -> Tree:
    """Grow one variance-reduction regression tree.

    ``samples`` selects (possibly repeated) training rows; default is every
    row once, and only the multiset matters. ``seed`` keys the random feature
    subsets and thresholds. ``order`` is an optional precomputed
    :func:`column_order` of ``X``, shared across the trees of a forest.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if min_samples_leaf < 1:
        raise ValueError("min_samples_leaf must be >= 1")
    d = X.shape[1]
    mf = d if max_features is None else max(1, min(int(max_features), d))
    if samples is None:
        samples = np.arange(X.shape[0], dtype=np.int64)
    else:
        samples = np.sort(np.asarray(samples, dtype=np.int64))
    if samples.shape[0] == 0:
        raise ValueError("cannot grow a tree on zero samples")
    if random_thresholds:
        order = np.empty((0, X.shape[0]), dtype=np.int64)
    elif order is None:
        order = K.column_order(X)
    grow = K.grow_tree_nb if _accel.use_numba() else K.grow_tree_np
    arrays = grow(
        X, y, samples, order, int(max_depth), int(min_samples_leaf), mf, bool(random_thresholds), int(seed)
    )
    return Tree(*arrays)


def _map_ordered(fn, items):
    """Run ``fn`` over ``items`` (threaded when allowed); result order is fixed."""
    workers = min(_accel.thread_count(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


class _Forest(Estimator):
    bootstrap = False
    random_thresholds = False

    def __init__(self, n_estimators=100, max_depth=7, min_samples_leaf=1, max_features=None, rng=None):
        if n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        self.n_estimators = int(n_estimators)
        self.max_depth = int(max_depth)
        self.min_samples_leaf = int(min_samples_leaf)
        self.max_features = max_features
        self.rng = rng if rng is not None else SeededRng(0)
        self.trees: list[Tree] = []

    def hyperparams(self):
        return {
            "n_estimators": self.n_estimators,
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
            "max_features": self.max_features,
        }

    def _tree_job(self, X, y, order, t):
        # stream base + tree index: each tree's draws are independent of scheduling
        tree_rng = self.rng.child(t)
        n = X.shape[0]
        samples = tree_rng.integers(n, size=n) if self.bootstrap else None
        return fit_cart(
            X,
            y,
            self.max_depth,
            self.min_samples_leaf,
            self.max_features,
            self.random_thresholds,
            seed=tree_rng.seed64(),
            samples=samples,
            order=order,
        )

    def fit(self, X, y):
        X, y = check_Xy(X, y, min_rows=2)
        X = np.ascontiguousarray(X)
        order = None if self.random_thresholds else K.column_order(X)
        self.trees = _map_ordered(lambda t: self._tree_job(X, y, order, t), range(self.n_estimators))
        self._pack()
        self.n_features_ = X.shape[1]
        self.train_shape_ = X.shape
        return self

    def _pack(self):
        sizes = [t.node_count for t in self.trees]
        self._offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        cat = lambda name: np.concatenate([getattr(t, name) for t in self.trees])
        self._packed = tuple(cat(a) for a in ("feature", "threshold", "left", "right", "value"))

    def predict(self, X):
        X = check_X(X, self.n_features_)
        if X.shape[0] == 0:
            return np.empty(0)
        X = np.ascontiguousarray(X)
        kernel = K.predict_forest_nb if _accel.use_numba() else K.predict_forest_np
        return kernel(X, self._offsets, *self._packed)

    def params_dict(self):
        return {"n_features": self.n_features_, "trees": [t.to_dict() for t in self.trees]}

    def load_params(self, d):
        self.n_features_ = int(d["n_features"])
        self.trees = [Tree.from_dict(t) for t in d["trees"]]
        self._pack()


class RandomForest(_Forest):
    """Bootstrap-bagged best-split trees, mean prediction."""

    kind = "random_forest"
    bootstrap = True


class ExtraTrees(_Forest):
    """Full-sample trees with one uniform random threshold per candidate feature."""

    kind = "extra_trees"
    random_thresholds = True


class GradientBoosting(Estimator):
    """Least-squares boosting of depth-limited best-split trees."""

    kind = "gradient_boosting"

    def __init__(self, n_estimators=40, max_depth=3, learning_rate=0.1, min_samples_leaf=1, rng=None):
        if n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        self.n_estimators = int(n_estimators)
        self.max_depth = int(max_depth)
        self.learning_rate = float(learning_rate)
        self.min_samples_leaf = int(min_samples_leaf)
        self.rng = rng
        self.trees: list[Tree] = []

    def hyperparams(self):
        return {
            "n_estimators": self.n_estimators,
            "max_depth": self.max_depth,
            "learning_rate": self.learning_rate,
            "min_samples_leaf": self.min_samples_leaf,
        }

    def fit(self, X, y):
        X, y = check_Xy(X, y, min_rows=2)
        X = np.ascontiguousarray(X)
        self.init_ = float(np.mean(y))
        current = np.full(y.shape[0], self.init_)
        self.trees = []
        order = K.column_order(X)
        self.train_loss_ = [float(np.mean((y - current) ** 2))]
        for _ in range(self.n_estimators):
            tree = fit_cart(X, y - current, self.max_depth, self.min_samples_leaf, order=order)
            current = current + self.learning_rate * tree.predict(X)
            self.trees.append(tree)
            self.train_loss_.append(float(np.mean((y - current) ** 2)))
        self.n_features_ = X.shape[1]
        self.train_shape_ = X.shape
        return self

    def staged_predict(self, X):
        X = np.ascontiguousarray(check_X(X, self.n_features_))
        out = np.full(X.shape[0], self.init_)
        yield out.copy()
        for tree in self.trees:
            out = out + self.learning_rate * tree.predict(X)
            yield out.copy()

    def predict(self, X):
        X = np.ascontiguousarray(check_X(X, self.n_features_))
        out = np.full(X.shape[0], self.init_)
        if X.shape[0] == 0:
            return out
        for tree in self.trees:
            out = out + self.learning_rate * tree.predict(X)
        return out

    def params_dict(self):
        return {"n_features": self.n_features_, "init": self.init_, "trees": [t.to_dict() for t in self.trees]}

    def load_params(self, d):
        self.n_features_ = int(d["n_features"])
        self.init_ = float(d["init"])
        self.trees = [Tree.from_dict(t) for t in d["trees"]]
