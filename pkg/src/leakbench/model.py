"""k-nearest-neighbour classification and t-test feature ranking."""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DataError, PreconditionError
from .features import Standardizer, apply_standardizer, fit_standardizer

METRICS = ("euclidean", "manhattan", "chebyshev", "cosine")
_CDIST_NAMES = {"euclidean": "euclidean", "manhattan": "cityblock", "chebyshev": "chebyshev"}


@dataclass(frozen=True)
class KnnConfig:
    k: int = 5
    metric: str = "euclidean"
    standardize: bool = False

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise PreconditionError(f"k must be a positive integer, got {self.k}")
        if self.metric not in METRICS:
            raise PreconditionError(f"unknown metric {self.metric!r}; choose from {METRICS}")

    def label(self) -> str:
        return f"k={self.k},{self.metric},{'std' if self.standardize else 'raw'}"


@dataclass(frozen=True)
class KnnModel:
    train: np.ndarray
    labels: np.ndarray
    config: KnnConfig
    standardizer: Optional[Standardizer] = None


def pairwise_distances(A, B, metric: str) -> np.ndarray:
    """Distances between rows of ``A`` (queries) and rows of ``B`` (train)."""
    if metric == "cosine":
        # 1 - cosine similarity on raw vectors; a zero vector has similarity 0
        na = np.linalg.norm(A, axis=1)
        nb = np.linalg.norm(B, axis=1)
        denom = np.outer(na, nb)
        with np.errstate(invalid="ignore", divide="ignore"):
            sim = np.where(denom > 0, (A @ B.T) / denom, 0.0)
        return np.clip(1.0 - sim, 0.0, 2.0)
    return cdist(A, B, metric=_CDIST_NAMES[metric])


def knn_fit(X, labels, cfg: KnnConfig = KnnConfig()) -> KnnModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise PreconditionError("X must be 2-D with one label per row")
    if cfg.k > X.shape[0]:
        raise PreconditionError(f"k={cfg.k} exceeds the {X.shape[0]} training rows")
    if not np.all(np.isfinite(X)):
        raise DataError("training features contain non-finite values")
    if not np.isin(y, (0, 1)).all():
        raise DataError("labels must be 0 or 1")
    if np.unique(y).size < 2:
        warnings.warn("kNN fitted on a single-class training set", RuntimeWarning, stacklevel=2)
    std = None
    if cfg.standardize:
        std = fit_standardizer(X)
        X = apply_standardizer(std, X)
    return KnnModel(X, y, cfg, std)


def knn_predict(model: KnnModel, X) -> np.ndarray:
    """Majority vote among the k nearest training rows.

    Distance ties go to the lower training-row index; vote ties go to the
    label of the single nearest row.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.train.shape[1]:
        raise PreconditionError(
            f"query has {X.shape[-1]} columns, model was fitted on {model.train.shape[1]}"
        )
    if model.standardizer is not None:
        X = apply_standardizer(model.standardizer, X)
    k = model.config.k
    dist = pairwise_distances(X, model.train, model.config.metric)
    nearest = np.argsort(dist, axis=1, kind="stable")[:, :k]
    votes = model.labels[nearest]
    ones = votes.sum(axis=1)
    pred = (2 * ones > k).astype(np.int64)
    tie = 2 * ones == k
    pred[tie] = votes[tie, 0]
    return pred


@dataclass(frozen=True)
class FeatureRanking:
    order: np.ndarray  # feature indices, best first
    scores: np.ndarray  # |t| per feature, indexed by feature
    rows: np.ndarray  # rows the ranking was computed on

    def top(self, count: int) -> np.ndarray:
        return self.order[:count]

    def to_csv(self, column_names: Optional[Sequence[str]] = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["rank", "feature_index", "column_name", "score"])
        for rank, idx in enumerate(self.order):
            name = column_names[idx] if column_names is not None else ""
            writer.writerow([rank, int(idx), name, f"{self.scores[idx]:.9g}"])
        return buf.getvalue()


def ttest_scores(X, labels, rows=None) -> np.ndarray:
    """Absolute pooled-variance two-sample t statistic of every column on ``rows``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(labels)
    rows = np.arange(X.shape[0]) if rows is None else np.asarray(rows, dtype=np.int64)
    sub, lab = X[rows], y[rows]
    a, b = sub[lab == 0], sub[lab == 1]
    n0, n1 = len(a), len(b)
    if n0 == 0 or n1 == 0:
        raise DataError("t-test needs both classes in the designated rows")
    if n0 < 2 or n1 < 2:
        raise DataError(f"t-test needs >= 2 rows per class, got {n0} and {n1}")
    diff = b.mean(axis=0) - a.mean(axis=0)
    pooled = ((n0 - 1) * a.var(axis=0, ddof=1) + (n1 - 1) * b.var(axis=0, ddof=1)) / (n0 + n1 - 2)
    se = np.sqrt(pooled * (1.0 / n0 + 1.0 / n1))
    t = np.zeros(X.shape[1])
    ok = se > 0
    t[ok] = np.abs(diff[ok]) / se[ok]
    t[~ok & (diff != 0)] = np.inf
    return t


def rank_features(scores, rows=None) -> FeatureRanking:
    """Descending by score; equal scores keep ascending feature index."""
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    rows = np.array([], dtype=np.int64) if rows is None else np.asarray(rows, dtype=np.int64)
    return FeatureRanking(order, scores, rows)
