"""Global (whole-dataset) versus local (training-only) t-test feature selection."""

from __future__ import annotations

import time

import numpy as np

from ..errors import DataError
from ..evaluation import accuracy, fit_and_score, verify_no_group_leakage
from ..model import rank_features, ttest_scores
from ..trialdata import TrialSet
from ._common import (
    first_argmax,
    holdout_split,
    inner_folds,
    matrix_digest,
    mean_sd,
    holdout_metrics,
    trial_features,
)
from .config import SelExpConfig, to_dict
from .report import ExperimentReport


def _inner_count_curve(X, y, folds, grid, knn, ranking_for_fold):
    """Mean and per-fold accuracy of each feature count over the inner folds."""
    per_count = [[] for _ in grid]
    flagged = []
    for i, (tr, va) in enumerate(folds):
        if np.unique(y[tr]).size < 2:
            flagged.append({"fold": i, "reason": "single-class train set"})
            continue
        try:
            order = ranking_for_fold(tr)
        except DataError as exc:
            flagged.append({"fold": i, "reason": str(exc)})
            continue
        for j, count in enumerate(grid):
            cm = fit_and_score(X[:, order[:count]], y, tr, va, knn)
            per_count[j].append(accuracy(cm))
    if all(not accs for accs in per_count):
        raise DataError("no usable inner fold for feature-count selection")
    means = [float(np.mean(a)) for a in per_count]
    return means, per_count, flagged


def run_selection_experiment(ts: TrialSet, cfg: SelExpConfig = SelExpConfig(), seed: int = 0) -> ExperimentReport:
    """Compare ranking on all trials with ranking inside the training folds only.

    Both arms share one trial-level holdout split.  The global arm picks its
    feature count per ``cfg.global_count_policy``; the local arm picks it by
    inner k-fold on the training trials, then re-ranks on the full training set.
    """
    start = time.perf_counter()
    fm = trial_features(ts, cfg)
    X, y = fm.values, fm.labels
    n_features = X.shape[1]
    grid = cfg.count_grid(n_features)
    plan, split_seed = holdout_split(fm, cfg.test_fraction, seed)
    train, test = plan.folds[0].train, plan.folds[0].test
    folds, inner_seed = inner_folds(train, cfg.inner_folds, seed)
    shared = {
        "split_hash": plan.digest(),
        "features_hash": matrix_digest(X),
        "split_leaky": verify_no_group_leakage(plan, fm.group_ids).leaky,
    }

    arms = {}
    if "global" in cfg.modes:
        all_rows = np.arange(X.shape[0])
        ranking = rank_features(ttest_scores(X, y, all_rows), all_rows)
        if cfg.global_count_policy == "test_max":
            curve = [accuracy(fit_and_score(X[:, ranking.top(c)], y, train, test, cfg.knn)) for c in grid]
            flagged = []
        else:
            curve, per_fold, flagged = _inner_count_curve(X, y, folds, grid, cfg.knn, lambda tr: ranking.order)
        best = first_argmax(curve)
        count = grid[best]
        cm = fit_and_score(X[:, ranking.top(count)], y, train, test, cfg.knn)
        arms["global"] = {
            **holdout_metrics(cm, test.size),
            "chosen_count": count,
            "count_curve": curve,
            "count_policy": cfg.global_count_policy,
            "ranking_rows": "all",
            "flagged_inner_folds": flagged,
            **shared,
        }
        if cfg.global_count_policy == "nested":
            arms["global"]["inner_sd"] = mean_sd(per_fold[best])[1]

    if "local" in cfg.modes:
        curve, per_fold, flagged = _inner_count_curve(
            X, y, folds, grid, cfg.knn, lambda tr: rank_features(ttest_scores(X, y, tr), tr).order
        )
        best = first_argmax(curve)
        count = grid[best]
        ranking = rank_features(ttest_scores(X, y, train), train)
        cm = fit_and_score(X[:, ranking.top(count)], y, train, test, cfg.knn)
        arms["local"] = {
            **holdout_metrics(cm, test.size),
            "chosen_count": count,
            "count_curve": curve,
            "inner_sd": mean_sd(per_fold[best])[1],
            "ranking_rows": "train",
            "flagged_inner_folds": flagged,
            **shared,
        }

    deltas = {}
    if len(arms) == 2:
        deltas = {m: arms["global"][m] - arms["local"][m] for m in ("accuracy", "balanced_accuracy")}
    return ExperimentReport(
        kind="selection",
        config={"experiment": to_dict(cfg), "count_grid": list(grid), "subject_id": ts.subject_id,
                "provenance": ts.provenance},
        seeds={"seed": seed, "holdout": split_seed, "inner": inner_seed},
        arms=arms,
        deltas=deltas,
        wall_time_s=time.perf_counter() - start,
    )
