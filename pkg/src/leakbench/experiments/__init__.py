"""Paired invalid/valid evaluation pipelines and the Monte Carlo suite."""

from .config import (
    DEFAULT_FEATURE_COUNTS,
    DEFAULT_K_VALUES,
    DEFAULT_SEGMENT_SECONDS,
    SegExpConfig,
    SelExpConfig,
    TuneExpConfig,
    derive_seed,
    from_dict,
    to_dict,
)
from .report import ExperimentReport, summarize, write_report_files
from .segmentation import run_segmentation_experiment
from .selection import run_selection_experiment
from .suite import run_inflation_suite
from .tuning import run_tuning_experiment

__all__ = [
    "DEFAULT_FEATURE_COUNTS",
    "DEFAULT_K_VALUES",
    "DEFAULT_SEGMENT_SECONDS",
    "SegExpConfig",
    "SelExpConfig",
    "TuneExpConfig",
    "derive_seed",
    "from_dict",
    "to_dict",
    "ExperimentReport",
    "summarize",
    "write_report_files",
    "run_segmentation_experiment",
    "run_selection_experiment",
    "run_inflation_suite",
    "run_tuning_experiment",
]
