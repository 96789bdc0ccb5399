"""Split planning, leakage audits, confusion-matrix metrics and cross-validation."""

from __future__ import annotations

import csv
import hashlib
import io
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError, PreconditionError
from .features import FeatureMatrix
from .model import KnnConfig, knn_fit, knn_predict

SCHEMES = ("kfold_rowwise", "leave_one_group_out", "group_holdout", "imported")


@dataclass(frozen=True)
class Fold:
    train: np.ndarray
    test: np.ndarray


@dataclass(frozen=True)
class SplitPlan:
    scheme: str
    folds: tuple
    n_rows: int
    seed: Optional[int] = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise PreconditionError(f"unknown scheme {self.scheme!r}")
        for i, f in enumerate(self.folds):
            if np.intersect1d(f.train, f.test).size:
                raise PreconditionError(f"fold {i}: train and test rows overlap")

    def digest(self) -> str:
        """Stable hash of the fold contents, used to prove two arms shared a split."""
        h = hashlib.sha256(f"{self.scheme}:{self.n_rows}".encode())
        for f in self.folds:
            h.update(np.asarray(f.train, dtype="<i8").tobytes())
            h.update(b"|")
            h.update(np.asarray(f.test, dtype="<i8").tobytes())
            h.update(b"#")
        return h.hexdigest()[:16]

    def to_csv(self) -> str:
        """``row_id,fold_id,side`` rows, the interchange format of ``leakbench audit``."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["row_id", "fold_id", "side"])
        for fold_id, f in enumerate(self.folds):
            for r in f.train:
                writer.writerow([int(r), fold_id, "train"])
            for r in f.test:
                writer.writerow([int(r), fold_id, "test"])
        return buf.getvalue()


def kfold_split(n_rows: int, k: int = 5, seed: int = 0) -> SplitPlan:
    """Shuffled, unstratified, group-blind k-fold over rows.

    This is the invalid scheme when rows are segments of shared trials; it is
    kept to reproduce that practice.
    """
    if k < 2:
        raise PreconditionError(f"k must be >= 2, got {k}")
    if k > n_rows:
        raise PreconditionError(f"k={k} exceeds n_rows={n_rows}")
    perm = np.random.default_rng(seed).permutation(n_rows)
    all_rows = np.arange(n_rows)
    folds = []
    for chunk in np.array_split(perm, k):
        test = np.sort(chunk)
        folds.append(Fold(np.setdiff1d(all_rows, test), test))
    return SplitPlan("kfold_rowwise", tuple(folds), n_rows, seed)


def leave_one_group_out(group_ids) -> SplitPlan:
    """One fold per distinct group, in ascending group order."""
    g = np.asarray(group_ids)
    groups = np.unique(g)
    if groups.size < 2:
        raise PreconditionError("leave-one-group-out needs at least two groups")
    folds = tuple(Fold(np.flatnonzero(g != grp), np.flatnonzero(g == grp)) for grp in groups)
    return SplitPlan("leave_one_group_out", folds, g.size)


def group_holdout(group_ids, test_fraction: float = 0.30, seed: int = 0) -> SplitPlan:
    """Single train/test split over whole groups; ``ceil(fraction * G)`` test groups."""
    g = np.asarray(group_ids)
    groups = np.unique(g)
    if groups.size < 2:
        raise PreconditionError("group holdout needs at least two groups")
    if not 0.0 < test_fraction < 1.0:
        raise PreconditionError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n_test = math.ceil(round(test_fraction * groups.size, 9))
    if n_test < 1 or n_test >= groups.size:
        raise PreconditionError(
            f"test_fraction {test_fraction} with {groups.size} groups leaves an empty side"
        )
    shuffled = np.random.default_rng(seed).permutation(groups)
    test_mask = np.isin(g, shuffled[:n_test])
    fold = Fold(np.flatnonzero(~test_mask), np.flatnonzero(test_mask))
    return SplitPlan("group_holdout", (fold,), g.size, seed)


@dataclass(frozen=True)
class LeakageReport:
    leaky: bool
    offending_groups: tuple  # of (group_id, folds) pairs
    scheme: str

    def summary(self) -> str:
        if not self.leaky:
            return f"clean: no group appears on both sides of any fold ({self.scheme})"
        lines = [f"LEAKY: {len(self.offending_groups)} group(s) on both sides ({self.scheme})"]
        for gid, folds in self.offending_groups:
            lines.append(f"  group {gid}: folds {list(folds)}")
        return "\n".join(lines)


def verify_no_group_leakage(plan: SplitPlan, group_ids) -> LeakageReport:
    g = np.asarray(group_ids)
    if g.size != plan.n_rows:
        raise PreconditionError(f"{g.size} group ids for a plan over {plan.n_rows} rows")
    hits = {}
    for fold_id, f in enumerate(plan.folds):
        shared = np.intersect1d(g[f.train], g[f.test])
        for gid in shared:
            hits.setdefault(gid.item(), []).append(fold_id)
    offending = tuple((gid, tuple(folds)) for gid, folds in sorted(hits.items()))
    return LeakageReport(bool(offending), offending, plan.scheme)


@dataclass(frozen=True)
class ConfusionMatrix:
    """2x2 counts indexed ``[true, predicted]``."""

    counts: np.ndarray

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "ConfusionMatrix":
        counts = np.zeros((2, 2), dtype=np.int64)
        np.add.at(counts, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
        return cls(counts)

    def __add__(self, other):
        return ConfusionMatrix(self.counts + other.counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def tp(self):
        return int(self.counts[1, 1])

    @property
    def fp(self):
        return int(self.counts[0, 1])

    @property
    def fn(self):
        return int(self.counts[1, 0])

    @property
    def tn(self):
        return int(self.counts[0, 0])

    @property
    def missing_classes(self):
        """True classes with no rows; they are left out of balanced accuracy."""
        return tuple(int(c) for c in np.flatnonzero(self.counts.sum(axis=1) == 0))


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise PreconditionError("empty confusion matrix")
    return float(np.trace(cm.counts) / cm.total)


def balanced_accuracy(cm: ConfusionMatrix) -> float:
    """Mean per-class recall over the classes present in the true labels."""
    if cm.total == 0:
        raise PreconditionError("empty confusion matrix")
    support = cm.counts.sum(axis=1)
    present = support > 0
    recalls = np.diag(cm.counts)[present] / support[present]
    return float(recalls.mean())


@dataclass(frozen=True)
class FoldResult:
    fold_id: int
    n_train: int
    n_test: int
    confusion: Optional[ConfusionMatrix]
    flagged: Optional[str] = None

    @property
    def accuracy(self):
        return None if self.confusion is None else accuracy(self.confusion)

    @property
    def balanced_accuracy(self):
        return None if self.confusion is None else balanced_accuracy(self.confusion)


@dataclass(frozen=True)
class EvalOutcome:
    scheme: str
    folds: tuple
    knn: KnnConfig

    @property
    def scored(self):
        return [f for f in self.folds if f.confusion is not None]

    @property
    def pooled(self) -> ConfusionMatrix:
        total = ConfusionMatrix(np.zeros((2, 2), dtype=np.int64))
        for f in self.scored:
            total = total + f.confusion
        return total

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([f.accuracy for f in self.scored]))

    @property
    def sd_accuracy(self) -> float:
        accs = [f.accuracy for f in self.scored]
        return float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0

    @property
    def mean_balanced_accuracy(self) -> float:
        return float(np.mean([f.balanced_accuracy for f in self.scored]))

    @property
    def pooled_accuracy(self) -> float:
        return accuracy(self.pooled)

    @property
    def pooled_balanced_accuracy(self) -> float:
        return balanced_accuracy(self.pooled)

    @property
    def flagged_folds(self):
        return [f.fold_id for f in self.folds if f.flagged]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["fold_id", "n_train", "n_test", "tp", "fp", "fn", "tn", "acc", "bal_acc"])
        for f in self.folds:
            if f.confusion is None:
                writer.writerow([f.fold_id, f.n_train, f.n_test, "", "", "", "", "", ""])
                continue
            cm = f.confusion
            writer.writerow(
                [f.fold_id, f.n_train, f.n_test, cm.tp, cm.fp, cm.fn, cm.tn,
                 f"{f.accuracy:.9g}", f"{f.balanced_accuracy:.9g}"]
            )
        cm = self.pooled
        writer.writerow(
            ["summary", sum(f.n_train for f in self.scored), cm.total, cm.tp, cm.fp, cm.fn, cm.tn,
             f"{self.mean_accuracy:.9g}", f"{self.mean_balanced_accuracy:.9g}"]
        )
        return buf.getvalue()


def fit_and_score(X, y, train, test, cfg: KnnConfig) -> ConfusionMatrix:
    """Fit kNN (and its standardizer) on ``train`` rows, score ``test`` rows."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = knn_fit(X[train], y[train], cfg)
    return ConfusionMatrix.from_predictions(y[test], knn_predict(model, X[test]))


def run_cv(X: FeatureMatrix, plan: SplitPlan, knn_cfg: KnnConfig = KnnConfig()) -> EvalOutcome:
    """Evaluate kNN on every fold of ``plan``.

    Folds whose training rows hold a single class are flagged and left out of
    the summary metrics.
    """
    if plan.n_rows != X.shape[0]:
        raise PreconditionError(f"plan covers {plan.n_rows} rows, matrix has {X.shape[0]}")
    values, y = X.values, X.labels
    results = []
    for fold_id, f in enumerate(plan.folds):
        if np.unique(y[f.train]).size < 2:
            results.append(FoldResult(fold_id, f.train.size, f.test.size, None, "single-class train set"))
            continue
        cm = fit_and_score(values, y, f.train, f.test, knn_cfg)
        results.append(FoldResult(fold_id, f.train.size, f.test.size, cm))
    if not any(r.confusion is not None for r in results):
        raise DataError("every fold had a single-class training set")
    return EvalOutcome(plan.scheme, tuple(results), knn_cfg)


@dataclass(frozen=True)
class ChanceCheck:
    accuracy: float
    sd: float
    n_classes: int
    chance: float
    flagged: bool

    def as_dict(self):
        return {
            "accuracy": self.accuracy,
            "sd": self.sd,
            "n_classes": self.n_classes,
            "chance": self.chance,
            "flagged": self.flagged,
        }


def chance_level_check(accuracy: float, sd: float, n_classes: int = 2) -> ChanceCheck:
    """Flag a result whose chance level lies within two standard deviations."""
    if n_classes < 2:
        raise PreconditionError("n_classes must be >= 2")
    if sd < 0:
        raise PreconditionError("sd must be non-negative")
    chance = 1.0 / n_classes
    # tolerance absorbs rounding in values like 0.35 - 0.25 vs 2 * 0.05
    flagged = abs(accuracy - chance) <= 2.0 * sd + 1e-12
    return ChanceCheck(float(accuracy), float(sd), n_classes, chance, bool(flagged))


def read_plan_csv(plan_text: str, groups_text: str):
    """Parse the audit interchange CSVs into ``(SplitPlan, group_ids)``.

    Row ids may be arbitrary integers; they are mapped to positions in the
    groups file.  Raises DataError when the two files disagree on row ids.
    """
    groups_rows = list(csv.DictReader(io.StringIO(groups_text)))
    plan_rows = list(csv.DictReader(io.StringIO(plan_text)))
    try:
        row_ids = [int(r["row_id"]) for r in groups_rows]
        group_ids = [int(r["group_id"]) for r in groups_rows]
        entries = [(int(r["row_id"]), int(r["fold_id"]), r["side"].strip()) for r in plan_rows]
    except (KeyError, ValueError, AttributeError) as exc:
        raise DataError(f"malformed plan/groups CSV ({exc})") from exc
    if len(set(row_ids)) != len(row_ids):
        raise DataError("duplicate row_id in groups file")
    position = {rid: i for i, rid in enumerate(row_ids)}
    unknown = sorted({rid for rid, _, _ in entries} - position.keys())
    if unknown:
        raise DataError(f"plan references row ids absent from groups file: {unknown[:10]}")
    unused = sorted(position.keys() - {rid for rid, _, _ in entries})
    if unused:
        raise DataError(f"groups file has row ids absent from the plan: {unused[:10]}")
    folds = {}
    for rid, fold_id, side in entries:
        if side not in ("train", "test"):
            raise DataError(f"side must be 'train' or 'test', got {side!r}")
        folds.setdefault(fold_id, {"train": [], "test": []})[side].append(position[rid])
    plan = SplitPlan(
        "imported",
        tuple(
            Fold(np.array(sorted(f["train"]), dtype=np.int64), np.array(sorted(f["test"]), dtype=np.int64))
            for _, f in sorted(folds.items())
        ),
        len(row_ids),
    )
    return plan, np.array(group_ids, dtype=np.int64)


def groups_csv(group_ids) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["row_id", "group_id"])
    for i, g in enumerate(group_ids):
        writer.writerow([i, int(g)])
    return buf.getvalue()
