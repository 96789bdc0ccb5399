"""Leakage-aware evaluation harness for trial-structured signal classification.

The package implements deliberately invalid evaluation pipelines (row-wise
k-fold after windowing, whole-dataset feature ranking, tuning on the test set)
next to their valid counterparts, and measures the accuracy inflation on
synthetic null-signal ("phantom") recordings.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DataError,
    FormatError,
    InvariantError,
    LeakbenchError,
    PreconditionError,
)
from .trialdata import (
    PhantomConfig,
    SegmentSet,
    Trial,
    TrialSet,
    binarize_labels,
    generate_phantom,
    load_trialset,
    save_trialset,
    segment_trials,
)
from .features import (
    FIVE_BANDS,
    FOUR_BANDS,
    Band,
    BandSet,
    FeatureMatrix,
    Spectrum,
    Standardizer,
    WelchParams,
    apply_standardizer,
    band_power,
    extract_features,
    fit_standardizer,
    welch_psd,
)
from .model import (
    FeatureRanking,
    KnnConfig,
    KnnModel,
    knn_fit,
    knn_predict,
    rank_features,
    ttest_scores,
)
from .evaluation import (
    ChanceCheck,
    ConfusionMatrix,
    EvalOutcome,
    LeakageReport,
    SplitPlan,
    accuracy,
    balanced_accuracy,
    chance_level_check,
    group_holdout,
    kfold_split,
    leave_one_group_out,
    run_cv,
    verify_no_group_leakage,
)

__all__ = [
    "__version__",
    "ConfigError",
    "DataError",
    "FormatError",
    "InvariantError",
    "LeakbenchError",
    "PreconditionError",
    "PhantomConfig",
    "SegmentSet",
    "Trial",
    "TrialSet",
    "binarize_labels",
    "generate_phantom",
    "load_trialset",
    "save_trialset",
    "segment_trials",
    "FIVE_BANDS",
    "FOUR_BANDS",
    "Band",
    "BandSet",
    "FeatureMatrix",
    "Spectrum",
    "Standardizer",
    "WelchParams",
    "apply_standardizer",
    "band_power",
    "extract_features",
    "fit_standardizer",
    "welch_psd",
    "FeatureRanking",
    "KnnConfig",
    "KnnModel",
    "knn_fit",
    "knn_predict",
    "rank_features",
    "ttest_scores",
    "ChanceCheck",
    "ConfusionMatrix",
    "EvalOutcome",
    "LeakageReport",
    "SplitPlan",
    "accuracy",
    "balanced_accuracy",
    "chance_level_check",
    "group_holdout",
    "kfold_split",
    "leave_one_group_out",
    "run_cv",
    "verify_no_group_leakage",
]
