"""Closed-form linear learners: ridge, kernel ridge and evidence-maximising Bayesian ridge."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .base import Estimator, check_X, check_Xy


def _center(X, y):
    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    return X - x_mean, y - y_mean, x_mean, y_mean


class Ridge(Estimator):
    """L2-penalised least squares with an unpenalised intercept."""

    kind = "ridge"

    def __init__(self, alpha=1.0, fit_intercept=True):
        if not alpha > 0:
            raise ValueError("alpha must be > 0")
        self.alpha = float(alpha)
        self.fit_intercept = bool(fit_intercept)

    def hyperparams(self):
        return {"alpha": self.alpha, "fit_intercept": self.fit_intercept}

    def fit(self, X, y):
        X, y = check_Xy(X, y)
        if self.fit_intercept:
            Xc, yc, x_mean, y_mean = _center(X, y)
        else:
            Xc, yc, x_mean, y_mean = X, y, np.zeros(X.shape[1]), 0.0
        d = X.shape[1]
        gram = Xc.T @ Xc
        gram[np.diag_indices(d)] += self.alpha
        self.coef_ = scipy.linalg.solve(gram, Xc.T @ yc, assume_a="pos")
        self.intercept_ = float(y_mean - x_mean @ self.coef_)
        self.train_shape_ = X.shape
        return self

    def predict(self, X):
        X = check_X(X, self.coef_.shape[0])
        return X @ self.coef_ + self.intercept_

    def params_dict(self):
        return {"coef": self.coef_.tolist(), "intercept": self.intercept_}

    def load_params(self, d):
        self.coef_ = np.array(d["coef"], dtype=np.float64)
        self.intercept_ = float(d["intercept"])


class KernelRidge(Estimator):
    """Dual-form ridge, no intercept: c = (K + alpha I)^-1 y, f(x) = sum_i c_i k(x_i, x)."""

    kind = "kernel_ridge"

    def __init__(self, alpha=1.0, kernel="linear"):
        if not alpha > 0:
            raise ValueError("alpha must be > 0")
        if kernel != "linear":
            raise ValueError(f"unsupported kernel {kernel!r}")
        self.alpha = float(alpha)
        self.kernel = kernel

    def hyperparams(self):
        return {"alpha": self.alpha, "kernel": self.kernel}

    def fit(self, X, y):
        X, y = check_Xy(X, y)
        gram = X @ X.T
        gram[np.diag_indices(X.shape[0])] += self.alpha
        self.dual_coef_ = scipy.linalg.solve(gram, y, assume_a="pos")
        self.X_fit_ = X.copy()
        self.train_shape_ = X.shape
        return self

    def predict(self, X):
        X = check_X(X, self.X_fit_.shape[1])
        return (X @ self.X_fit_.T) @ self.dual_coef_

    def params_dict(self):
        return {"dual_coef": self.dual_coef_.tolist(), "X_fit": self.X_fit_.tolist()}

    def load_params(self, d):
        self.dual_coef_ = np.array(d["dual_coef"], dtype=np.float64)
        self.X_fit_ = np.array(d["X_fit"], dtype=np.float64).reshape(self.dual_coef_.shape[0], -1)


class BayesianRidge(Estimator):
    """Ridge whose noise and weight precisions are set by type-II maximum likelihood.

    Attributes after fit: ``coef_``, ``intercept_``, ``alpha_`` (noise
    precision), ``lambda_`` (weight precision), ``n_iter_``.
    """

    kind = "bayesian_ridge"

    def __init__(self, max_iter=300, tol=1e-3, eps=1e-6):
        self.max_iter = int(max_iter)
        self.tol = float(tol)
        self.eps = float(eps)

    def hyperparams(self):
        return {"max_iter": self.max_iter, "tol": self.tol, "eps": self.eps}

    def fit(self, X, y):
        X, y = check_Xy(X, y, min_rows=2)
        n, d = X.shape
        Xc, yc, x_mean, y_mean = _center(X, y)
        self.train_shape_ = X.shape
        var_y = float(np.var(y))
        if var_y == 0:
            self.coef_ = np.zeros(d)
            self.intercept_ = y_mean
            self.alpha_, self.lambda_, self.n_iter_ = np.inf, np.inf, 0
            return self

        # X^T X = V diag(s) V^T
        s, v = np.linalg.eigh(Xc.T @ Xc)
        s = np.clip(s, 0.0, None)
        vt = v.T
        xty_rot = vt @ (Xc.T @ yc)
        two_eps = 2.0 * self.eps

        def posterior_mean(a, b):
            return v @ (a / (b + a * s) * xty_rot)

        a = 1.0 / var_y
        b = 1.0
        m = posterior_mean(a, b)
        n_iter = 0
        for n_iter in range(1, self.max_iter + 1):
            gamma = float(np.sum(a * s / (b + a * s)))
            rss = float(np.sum((yc - Xc @ m) ** 2))
            b = (gamma + two_eps) / (float(m @ m) + two_eps)
            a = (n - gamma + two_eps) / (rss + two_eps)
            m_new = posterior_mean(a, b)
            delta = float(np.max(np.abs(m_new - m)))
            m = m_new
            if delta < self.tol:
                break
        self.coef_ = m
        self.intercept_ = float(y_mean - x_mean @ m)
        self.alpha_, self.lambda_, self.n_iter_ = a, b, n_iter
        return self

    def predict(self, X):
        X = check_X(X, self.coef_.shape[0])
        return X @ self.coef_ + self.intercept_

    def params_dict(self):
        return {
            "coef": self.coef_.tolist(),
            "intercept": self.intercept_,
            "alpha": float(self.alpha_) if np.isfinite(self.alpha_) else None,
            "lambda": float(self.lambda_) if np.isfinite(self.lambda_) else None,
        }

    def load_params(self, d):
        self.coef_ = np.array(d["coef"], dtype=np.float64)
        self.intercept_ = float(d["intercept"])
        self.alpha_ = np.inf if d.get("alpha") is None else float(d["alpha"])
        self.lambda_ = np.inf if d.get("lambda") is None else float(d["lambda"])
