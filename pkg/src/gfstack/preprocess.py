"""Feature preprocessing: z-scoring, PCA denoising, variance filter, F-test top-k.

The fitted pipeline is a frozen bundle of statistics learned on training rows
only; :func:`transform` replays it on any matrix without refitting.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import sys
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .table import DataError, FeatureTable

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
F_MAX = sys.float_info.max
DEFAULT_VARIANCE_THRESHOLD = 1e-8


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StandardizerState:
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", _frozen(self.mu))
        object.__setattr__(self, "sigma", _frozen(self.sigma))

    @property
    def degenerate(self) -> np.ndarray:
        return self.sigma == 0


@dataclass(frozen=True)
class PcaState:
    center: np.ndarray
    components: np.ndarray  # p x r, orthonormal columns
    eigenvalues: np.ndarray  # length r, descending
    rank_flagged: bool = False  # minka_rank fell back to r = 1

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(self.center))
        object.__setattr__(self, "components", _frozen(self.components))
        object.__setattr__(self, "eigenvalues", _frozen(self.eigenvalues))

    @property
    def r(self) -> int:
        return self.components.shape[1]


@dataclass(frozen=True)
class SelectorState:
    variance_mask: np.ndarray
    f_values: np.ndarray  # one per PCA component; masked-out entries are never selected
    selected: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "variance_mask", _frozen(self.variance_mask, bool))
        object.__setattr__(self, "f_values", _frozen(self.f_values))
        object.__setattr__(self, "selected", _frozen(self.selected, np.int64))


@dataclass(frozen=True)
class FittedPipeline:
    standardizer: StandardizerState
    pca: PcaState
    selector: SelectorState
    k: int

    @property
    def dims(self) -> tuple:
        """Dimensionality chain (p, r, surviving, k)."""
        return (
            self.standardizer.mu.shape[0],
            self.pca.r,
            int(self.selector.variance_mask.sum()),
            self.k,
        )

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "mu": self.standardizer.mu.tolist(),
            "sigma": self.standardizer.sigma.tolist(),
            "center": self.pca.center.tolist(),
            "components": self.pca.components.T.tolist(),  # column-major
            "eigenvalues": self.pca.eigenvalues.tolist(),
            "rank_flagged": self.pca.rank_flagged,
            "variance_mask": self.selector.variance_mask.tolist(),
            "f_values": self.selector.f_values.tolist(),
            "selected": self.selector.selected.tolist(),
            "k": self.k,
        }

    @classmethod
    def from_dict(cls, d: dict) -> FittedPipeline:
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported pipeline version {d.get('format_version')!r}")
        p = len(d["mu"])
        comps = np.array(d["components"], dtype=np.float64).reshape(-1, p).T
        return cls(
            standardizer=StandardizerState(d["mu"], d["sigma"]),
            pca=PcaState(d["center"], comps, d["eigenvalues"], bool(d.get("rank_flagged", False))),
            selector=SelectorState(d["variance_mask"], d["f_values"], d["selected"]),
            k=int(d["k"]),
        )

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def fit_standardizer(table) -> StandardizerState:
    x = table.values if isinstance(table, FeatureTable) else np.ascontiguousarray(table, dtype=np.float64)
    if x.shape[0] < 2:
        raise DataError("standardizer needs at least 2 rows")
    return StandardizerState(x.mean(axis=0), x.std(axis=0))


def apply_standardizer(state: StandardizerState, matrix) -> np.ndarray:
    x = np.ascontiguousarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != state.mu.shape[0]:
        raise DataError(f"expected {state.mu.shape[0]} columns, got shape {x.shape}")
    safe = np.where(state.sigma > 0, state.sigma, 1.0)
    out = (x - state.mu) / safe
    out[:, state.sigma == 0] = 0.0
    return out


def minka_rank(eigenvalues, n: int):
    """Rank maximising the Laplace-approximated PPCA evidence.

    Returns ``(rank, flagged)``; ``flagged`` is True when no candidate was
    admissible and the rank fell back to 1.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    q = lam.shape[0]
    if q < 2:
        raise ValueError("need at least two eigenvalues")
    scores = log_evidence_curve(lam, n)
    scores = np.where(np.isnan(scores), -np.inf, scores)
    if np.all(scores == -np.inf):
        warnings.warn("no admissible PCA rank; falling back to 1", RuntimeWarning, stacklevel=2)
        return 1, True
    return int(np.argmax(scores)) + 1, False


def log_evidence_curve(eigenvalues, n: int) -> np.ndarray:
    """Log evidence for each candidate rank 1..q-1 (NaN where inadmissible)."""
    lam = np.asarray(eigenvalues, dtype=np.float64)
    q = lam.shape[0]
    out = np.full(q - 1, np.nan)
    log_n = math.log(n)
    for k in range(1, q):
        out[k - 1] = _log_evidence(lam, k, n, log_n)
    return out


def _log_evidence(lam, k, n, log_n):
    q = lam.shape[0]
    if np.any(lam[:k] <= 0):
        return np.nan
    sigma2 = lam[k:].sum() / (q - k)
    if sigma2 <= 0:
        return np.nan
    i = np.arange(1, k + 1)
    half = (q - i + 1) / 2.0
    p_u = np.sum(gammaln(half) - half * math.log(math.pi)) - k * math.log(2.0)
    p_l = -(n / 2.0) * np.sum(np.log(lam[:k]))
    p_v = -(n * (q - k) / 2.0) * math.log(sigma2)
    m = q * k - k * (k + 1) / 2.0
    p_p = ((m + k + 1) / 2.0) * math.log(2.0 * math.pi)
    tilde = lam.copy()
    tilde[k:] = sigma2
    p_a = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        for a in range(k):
            rest = slice(a + 1, q)
            p_a += np.sum(
                np.log(1.0 / tilde[rest] - 1.0 / tilde[a]) + np.log(lam[a] - lam[rest]) + log_n
            )
    return p_u + p_l + p_v + p_p - (k / 2.0) * log_n - 0.5 * p_a


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so that its largest-magnitude entry is positive."""
    if vectors.size == 0:
        return vectors
    rows = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[rows, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def fit_pca(matrix, rank: int | None = None) -> PcaState:
    """Eigen-decompose the sample covariance (divisor n-1) via SVD.

    ``rank`` overrides the automatic Minka choice.
    """
    x = np.ascontiguousarray(matrix, dtype=np.float64)
    n, p = x.shape
    if n < 3 or p < 2:
        raise DataError(f"PCA needs n >= 3 and p >= 2, got {x.shape}")
    center = x.mean(axis=0)
    xc = x - center
    if not np.any(xc):
        raise DataError("degenerate matrix: all rows identical")
    _, s, vt = np.linalg.svd(xc, full_matrices=False)
    spectrum = s**2 / (n - 1)
    flagged = False
    if rank is None:
        rank, flagged = minka_rank(spectrum, n)
    if not 1 <= rank <= min(n, p):
        raise DataError(f"rank {rank} out of range for shape {x.shape}")
    components = _fix_signs(vt[:rank].T)
    return PcaState(center, components, spectrum[:rank], flagged)


def apply_pca(state: PcaState, matrix) -> np.ndarray:
    x = np.ascontiguousarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != state.center.shape[0]:
        raise DataError(f"expected {state.center.shape[0]} columns, got shape {x.shape}")
    return (x - state.center) @ state.components


def fit_variance_mask(scores, threshold: float = DEFAULT_VARIANCE_THRESHOLD) -> np.ndarray:
    if threshold < 0:
        raise ValueError("variance threshold must be >= 0")
    return np.ascontiguousarray(scores, dtype=np.float64).var(axis=0) > threshold


def f_regression(scores, targets) -> np.ndarray:
    """Univariate regression F statistic of each column against ``targets``."""
    x = np.ascontiguousarray(scores, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    n = y.shape[0]
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != n:
        raise DataError("scores and targets disagree on row count")
    if n < 3:
        raise DataError("F test needs at least 3 samples")
    yc = y - y.mean()
    yss = yc @ yc
    if yss == 0:
        raise DataError("target is constant")
    xc = x - x.mean(axis=0)
    xss = np.einsum("ij,ij->j", xc, xc)
    live = xss > 0
    r = np.zeros(x.shape[1])
    r[live] = (xc[:, live].T @ yc) / np.sqrt(xss[live] * yss)
    r2 = np.clip(r * r, 0.0, 1.0)
    with np.errstate(divide="ignore"):
        f = r2 / (1.0 - r2) * (n - 2)
    f[~live] = 0.0
    return np.where(np.isfinite(f), f, F_MAX)


def select_top_k(f_values, mask, k: int) -> SelectorState:
    f = np.asarray(f_values, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    candidates = np.flatnonzero(mask)
    if k < 1 or k > candidates.shape[0]:
        raise DataError(f"cannot select {k} of {candidates.shape[0]} surviving components")
    # lexsort: last key is primary -> descending F, then ascending index
    order = np.lexsort((candidates, -f[candidates]))
    chosen = np.sort(candidates[order[:k]])
    return SelectorState(mask, f, chosen)


def fit_pipeline(
    table: FeatureTable,
    k: int = 24,
    variance_threshold: float = DEFAULT_VARIANCE_THRESHOLD,
    rank: int | None = None,
) -> FittedPipeline:
    if not table.has_target:
        raise DataError("pipeline fitting needs a target column")
    if table.n < 3:
        raise DataError("pipeline fitting needs at least 3 rows")
    standardizer = fit_standardizer(table)
    z = apply_standardizer(standardizer, table.values)
    pca = fit_pca(z, rank=rank)
    scores = apply_pca(pca, z)
    mask = fit_variance_mask(scores, variance_threshold)
    f = f_regression(scores, table.target)
    selector = select_top_k(f, mask, k)
    pipe = FittedPipeline(standardizer, pca, selector, k)
    logger.debug("pipeline dims %s", pipe.dims)
    return pipe


def transform(pipeline: FittedPipeline, matrix) -> np.ndarray:
    z = apply_standardizer(pipeline.standardizer, matrix)
    return apply_pca(pipeline.pca, z)[:, pipeline.selector.selected]
