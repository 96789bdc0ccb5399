"""Hyperparameter choice on the test set versus nested inner cross-validation."""

from __future__ import annotations

import time

import numpy as np

from ..errors import DataError
from ..evaluation import accuracy, balanced_accuracy, fit_and_score, verify_no_group_leakage
from ..trialdata import TrialSet
from ._common import first_argmax, holdout_split, inner_folds, matrix_digest, mean_sd, holdout_metrics, trial_features
from .config import TuneExpConfig, to_dict
from .report import ExperimentReport


def run_tuning_experiment(ts: TrialSet, cfg: TuneExpConfig = TuneExpConfig(), seed: int = 0) -> ExperimentReport:
    """Compare picking the kNN configuration by test accuracy with nested selection.

    The correct arm scores every configuration by mean inner-fold
    ``cfg.selection_metric`` (first in grid order wins ties), refits on the
    whole training set and is evaluated once.  Configurations whose k exceeds
    an inner training fold are skipped by that arm.
    """
    start = time.perf_counter()
    fm = trial_features(ts, cfg)
    X, y = fm.values, fm.labels
    grid = cfg.grid()
    plan, split_seed = holdout_split(fm, cfg.test_fraction, seed)
    train, test = plan.folds[0].train, plan.folds[0].test
    folds, inner_seed = inner_folds(train, cfg.inner_folds, seed)
    shared = {
        "split_hash": plan.digest(),
        "features_hash": matrix_digest(X),
        "split_leaky": verify_no_group_leakage(plan, fm.group_ids).leaky,
    }
    if any(c.k > train.size for c in grid):
        raise DataError(f"grid k up to {max(c.k for c in grid)} exceeds the {train.size} training trials")

    arms = {}
    if "wrong" in cfg.modes:
        cms = [fit_and_score(X, y, train, test, c) for c in grid]
        curve = [accuracy(cm) for cm in cms]
        best = first_argmax(curve)
        arms["wrong"] = {
            **holdout_metrics(cms[best], test.size),
            "chosen": grid[best].label(),
            "test_curve": curve,
            **shared,
        }

    if "correct" in cfg.modes:
        score_fn = balanced_accuracy if cfg.selection_metric == "balanced_accuracy" else accuracy
        usable = [(tr, va) for tr, va in folds if np.unique(y[tr]).size == 2]
        flagged = len(folds) - len(usable)
        if not usable:
            raise DataError("no inner fold has both classes in its training part")
        smallest = min(tr.size for tr, _ in usable)
        scores, fold_accs, skipped = [], [], []
        for c in grid:
            if c.k > smallest:
                scores.append(-np.inf)
                fold_accs.append([])
                skipped.append(c.label())
                continue
            cms = [fit_and_score(X, y, tr, va, c) for tr, va in usable]
            scores.append(float(np.mean([score_fn(cm) for cm in cms])))
            fold_accs.append([accuracy(cm) for cm in cms])
        best = first_argmax(scores)
        if not np.isfinite(scores[best]):
            raise DataError("every grid configuration is infeasible on the inner folds")
        cm = fit_and_score(X, y, train, test, grid[best])
        arms["correct"] = {
            **holdout_metrics(cm, test.size),
            "chosen": grid[best].label(),
            "inner_scores": [s if np.isfinite(s) else None for s in scores],
            "inner_sd": mean_sd(fold_accs[best])[1],
            "skipped_configs": skipped,
            "flagged_inner_folds": flagged,
            **shared,
        }

    deltas = {}
    if len(arms) == 2:
        deltas = {m: arms["wrong"][m] - arms["correct"][m] for m in ("accuracy", "balanced_accuracy")}
    return ExperimentReport(
        kind="tuning",
        config={"experiment": to_dict(cfg), "grid": [c.label() for c in grid], "subject_id": ts.subject_id,
                "provenance": ts.provenance},
        seeds={"seed": seed, "holdout": split_seed, "inner": inner_seed},
        arms=arms,
        deltas=deltas,
        wall_time_s=time.perf_counter() - start,
    )
