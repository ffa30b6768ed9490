"""Seeded synthetic datasets shaped like the parcellation-volume regression task."""

from __future__ import annotations

import numpy as np

from .table import FeatureTable, SeededRng


def make_benchmark(n=800, k=24, r2=0.1, target_std=9.19, interaction=0.5, seed=0):
    """Additive linear + pairwise-interaction signal in standard-normal features.

    The signal is scaled so that its share of target variance is ``r2`` and
    the target's population std is close to ``target_std``.
    Returns ``(X, y)``.
    """
    g = SeededRng(seed, 0x5EED).generator
    X = g.standard_normal((n, k))
    w = g.standard_normal(k)
    w /= np.linalg.norm(w)
    signal = X @ w + interaction * X[:, 0] * X[:, 1]
    signal = (signal - signal.mean()) / signal.std()
    var = target_std**2
    y = np.sqrt(r2 * var) * signal + g.normal(0.0, np.sqrt((1.0 - r2) * var), n)
    return X, y


def make_volume_table(n=400, p=122, n_factors=40, r2=0.15, target_std=9.19, seed=0, target_name="gf"):
    """Correlated positive "volume" columns driven by a few latent factors.

    The target depends linearly on the first two factors, so the signal lives
    in a low-dimensional subspace that PCA can recover.
    """
    g = SeededRng(seed, 0x7AB1E).generator
    latent = g.standard_normal((n, n_factors))
    loadings = g.standard_normal((n_factors, p)) * np.linspace(3.0, 0.5, n_factors)[:, None]
    scale = g.uniform(500.0, 5000.0, p)
    values = scale * (1.0 + 0.02 * (latent @ loadings + g.standard_normal((n, p))))
    signal = latent[:, 0] - 0.7 * latent[:, 1]
    signal = (signal - signal.mean()) / signal.std()
    var = target_std**2
    target = np.sqrt(r2 * var) * signal + g.normal(0.0, np.sqrt((1.0 - r2) * var), n)
    return FeatureTable(
        subject_ids=tuple(f"S{i:05d}" for i in range(n)),
        columns=tuple(f"region_{j:03d}" for j in range(p)),
        values=values,
        target=target,
        target_name=target_name,
    )
