"""Helpers shared by the holdout-based experiments."""

from __future__ import annotations

import hashlib
import math

import numpy as np

from ..evaluation import ConfusionMatrix, accuracy, balanced_accuracy, group_holdout, kfold_split
from ..features import BAND_PRESETS, extract_features
from .config import derive_seed


def trial_features(ts, cfg):
    return extract_features(ts, BAND_PRESETS[cfg.bands], cfg.welch)


def holdout_split(fm, test_fraction, seed):
    split_seed = derive_seed(seed, "holdout")
    plan = group_holdout(fm.group_ids, test_fraction, split_seed)
    return plan, split_seed


def inner_folds(train_rows, n_folds, seed):
    """Row-wise k-fold over the training rows, returned as absolute row indices."""
    inner_seed = derive_seed(seed, "inner")
    plan = kfold_split(train_rows.size, n_folds, inner_seed)
    return [(train_rows[f.train], train_rows[f.test]) for f in plan.folds], inner_seed


def matrix_digest(values) -> str:
    return hashlib.sha256(np.ascontiguousarray(values, dtype="<f8").tobytes()).hexdigest()[:16]


def holdout_metrics(cm: ConfusionMatrix, n_test: int):
    acc = accuracy(cm)
    return {
        "accuracy": acc,
        "balanced_accuracy": balanced_accuracy(cm),
        "n_test": n_test,
        "test_binomial_sd": math.sqrt(acc * (1.0 - acc) / n_test),
        "confusion": cm.counts.tolist(),
    }


def first_argmax(values):
    """Index of the first maximum; ``-inf`` entries never win unless all are ``-inf``."""
    return int(np.argmax(np.asarray(values, dtype=np.float64)))


def mean_sd(values):
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return float("nan"), float("nan")
    sd = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return float(values.mean()), sd
