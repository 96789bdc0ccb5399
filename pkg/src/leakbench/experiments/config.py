"""Experiment configurations and the child-seed derivation rule."""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, fields, is_dataclass, replace
from typing import Optional

from ..errors import ConfigError
from ..features import BAND_PRESETS, WelchParams
from ..model import METRICS, KnnConfig
from ..trialdata import PhantomConfig

DEFAULT_SEGMENT_SECONDS = (60, 30, 20, 15, 12, 10, 6, 5, 4, 3, 2, 1)
DEFAULT_FEATURE_COUNTS = (5, 10, 15, 20, 30, 40, 60, 80, 100, 128)
DEFAULT_K_VALUES = (1, 3, 5, 7, 9, 15, 25)


def derive_seed(master_seed: int, tag: str, index: int = 0) -> int:
    """64-bit child seed: first 8 bytes (little-endian) of BLAKE2b("master:tag:index")."""
    digest = hashlib.blake2b(f"{int(master_seed)}:{tag}:{int(index)}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _check_bands(name):
    if name not in BAND_PRESETS:
        raise ConfigError("bands", f"unknown preset {name!r}; choose from {sorted(BAND_PRESETS)}")


@dataclass(frozen=True)
class SegExpConfig:
    segment_seconds: tuple = DEFAULT_SEGMENT_SECONDS
    knn: KnnConfig = KnnConfig()
    bands: str = "FOUR"
    welch: WelchParams = WelchParams()
    kfold_k: int = 5

    def __post_init__(self):
        if not self.segment_seconds:
            raise ConfigError("segment_seconds", "must not be empty")
        if any(t <= 0 for t in self.segment_seconds):
            raise ConfigError("segment_seconds", "values must be positive")
        if self.kfold_k < 2:
            raise ConfigError("kfold_k", "must be >= 2")
        _check_bands(self.bands)


@dataclass(frozen=True)
class SelExpConfig:
    modes: tuple = ("global", "local")
    feature_counts: Optional[tuple] = None  # None: DEFAULT_FEATURE_COUNTS clipped to F, plus F
    inner_folds: int = 5
    test_fraction: float = 0.30
    global_count_policy: str = "test_max"
    knn: KnnConfig = KnnConfig()
    bands: str = "FOUR"
    welch: WelchParams = WelchParams()

    def __post_init__(self):
        if not self.modes or not set(self.modes) <= {"global", "local"}:
            raise ConfigError("modes", "must be a non-empty subset of {global, local}")
        if self.global_count_policy not in ("test_max", "nested"):
            raise ConfigError("global_count_policy", "must be 'test_max' or 'nested'")
        if self.feature_counts is not None:
            counts = list(self.feature_counts)
            if not counts or counts != sorted(set(counts)) or counts[0] < 1:
                raise ConfigError("feature_counts", "must be positive, unique and ascending")
        if self.inner_folds < 2:
            raise ConfigError("inner_folds", "must be >= 2")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction", "must lie in (0, 1)")
        _check_bands(self.bands)

    def count_grid(self, n_features: int) -> tuple:
        if self.feature_counts is None:
            grid = [c for c in DEFAULT_FEATURE_COUNTS if c < n_features] + [n_features]
            return tuple(grid)
        if self.feature_counts[-1] > n_features:
            raise ConfigError(
                "feature_counts", f"grid value {self.feature_counts[-1]} exceeds {n_features} features"
            )
        return tuple(self.feature_counts)


@dataclass(frozen=True)
class TuneExpConfig:
    modes: tuple = ("wrong", "correct")
    k_values: tuple = DEFAULT_K_VALUES
    standardize: tuple = (False, True)
    metrics: tuple = METRICS
    inner_folds: int = 5
    test_fraction: float = 0.30
    selection_metric: str = "balanced_accuracy"
    bands: str = "FOUR"
    welch: WelchParams = WelchParams()

    def __post_init__(self):
        if not self.modes or not set(self.modes) <= {"wrong", "correct"}:
            raise ConfigError("modes", "must be a non-empty subset of {wrong, correct}")
        if not self.k_values or not self.standardize or not self.metrics:
            raise ConfigError("grid", "hyperparameter grid must not be empty")
        if any(m not in METRICS for m in self.metrics):
            raise ConfigError("metrics", f"choose from {METRICS}")
        if self.selection_metric not in ("balanced_accuracy", "accuracy"):
            raise ConfigError("selection_metric", "must be 'balanced_accuracy' or 'accuracy'")
        if self.inner_folds < 2:
            raise ConfigError("inner_folds", "must be >= 2")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction", "must lie in (0, 1)")
        _check_bands(self.bands)

    def grid(self):
        """All configurations, k outermost, then standardization, then metric."""
        return [
            KnnConfig(k=k, metric=m, standardize=s)
            for k in self.k_values
            for s in self.standardize
            for m in self.metrics
        ]


def to_dict(cfg) -> dict:
    return asdict(cfg)


_NESTED = {"knn": KnnConfig, "welch": WelchParams}


def from_dict(cls, data: Optional[dict], base=None):
    """Build ``cls`` from a (possibly partial) dict layered over ``base`` or defaults."""
    base = cls() if base is None else base
    if not data:
        return base
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(cls.__name__, f"unknown keys {sorted(unknown)}")
    values = {}
    for name, value in data.items():
        current = getattr(base, name)
        if name in _NESTED and isinstance(value, dict):
            value = from_dict(_NESTED[name], value, current if is_dataclass(current) else None)
        elif isinstance(value, list):
            value = tuple(value)
        values[name] = value
    try:
        return replace(base, **values)
    except TypeError as exc:
        raise ConfigError(cls.__name__, str(exc)) from exc
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(cls.__name__, str(exc)) from exc


__all__ = [
    "DEFAULT_FEATURE_COUNTS",
    "DEFAULT_K_VALUES",
    "DEFAULT_SEGMENT_SECONDS",
    "PhantomConfig",
    "SegExpConfig",
    "SelExpConfig",
    "TuneExpConfig",
    "derive_seed",
    "from_dict",
    "to_dict",
]
