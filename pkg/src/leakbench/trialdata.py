"""Trial-structured datasets: model, phantom generator, segmentation, persistence.

A :class:`TrialSet` holds one subject's recordings as a ``(T, C, S)`` float32
block (trials x channels x samples) plus per-trial ratings and/or binary
labels.  The on-disk format is a directory with ``meta.json`` and a raw
little-endian ``signals.f32`` payload.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Mapping, Optional

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError, DataError, FormatError, PreconditionError

FORMAT_VERSION = 1
RATING_AXES = ("valence", "arousal", "dominance", "liking")
RATING_RANGE = (1.0, 9.0)
LAYOUT = "trial-major then channel-major then sample"

META_FILE = "meta.json"
SIGNAL_FILE = "signals.f32"


@dataclass(frozen=True)
class Trial:
    """One contiguous recording with its ratings and/or binary label."""

    trial_id: int
    signal: np.ndarray  # (C, S), channel-major
    ratings: Optional[Mapping[str, float]] = None
    binary_label: Optional[int] = None

    def __post_init__(self):
        if self.ratings:
            lo, hi = RATING_RANGE
            for axis, value in self.ratings.items():
                if not lo <= value <= hi:
                    raise DataError(
                        f"trial {self.trial_id}: {axis} rating {value} outside [{lo:g}, {hi:g}]"
                    )
        if self.binary_label is not None and self.binary_label not in (0, 1):
            raise DataError(f"trial {self.trial_id}: binary_label must be 0 or 1")


@dataclass(frozen=True)
class TrialSet:
    """A subject's trials sharing one channel layout and sampling rate."""

    subject_id: str
    sampling_rate_hz: float
    channel_names: tuple
    trials: tuple
    provenance: str = "imported"

    def __post_init__(self):
        if not self.trials:
            raise DataError("a TrialSet needs at least one trial")
        if not self.channel_names:
            raise DataError("a TrialSet needs at least one channel")
        if self.sampling_rate_hz <= 0:
            raise DataError("sampling_rate_hz must be positive")
        if self.provenance not in ("phantom", "imported"):
            raise DataError(f"unknown provenance {self.provenance!r}")
        shape = self.trials[0].signal.shape
        if shape[0] != len(self.channel_names):
            raise DataError(
                f"signal has {shape[0]} channels but {len(self.channel_names)} names"
            )
        for trial in self.trials:
            if trial.signal.shape != shape:
                raise DataError(
                    f"trial {trial.trial_id} has shape {trial.signal.shape}, expected {shape}"
                )
        ids = [t.trial_id for t in self.trials]
        if len(set(ids)) != len(ids):
            raise DataError("trial ids must be unique")

    @classmethod
    def from_array(
        cls,
        signals,
        sampling_rate_hz,
        *,
        subject_id="subject",
        channel_names=None,
        trial_ids=None,
        labels=None,
        ratings=None,
        provenance="imported",
    ) -> "TrialSet":
        """Build a TrialSet from a ``(T, C, S)`` array."""
        signals = np.ascontiguousarray(signals, dtype=np.float32)
        if signals.ndim != 3:
            raise DataError(f"signals must be 3-D (trials, channels, samples), got {signals.ndim}-D")
        n_trials, n_channels, _ = signals.shape
        if channel_names is None:
            channel_names = [f"ch{c:02d}" for c in range(n_channels)]
        if trial_ids is None:
            trial_ids = range(n_trials)
        trial_ids = [int(i) for i in trial_ids]
        trials = []
        for i, tid in enumerate(trial_ids):
            label = None if labels is None else int(labels[i])
            rating = None if ratings is None else dict(ratings[i])
            trials.append(Trial(tid, signals[i], rating, label))
        return cls(
            subject_id=subject_id,
            sampling_rate_hz=float(sampling_rate_hz),
            channel_names=tuple(channel_names),
            trials=tuple(trials),
            provenance=provenance,
        )

    @cached_property
    def signals(self) -> np.ndarray:
        """All trial signals stacked as a ``(T, C, S)`` float32 array."""
        return np.stack([np.asarray(t.signal, dtype=np.float32) for t in self.trials])

    @property
    def n_trials(self) -> int:
        return len(self.trials)

    @property
    def n_channels(self) -> int:
        return len(self.channel_names)

    @property
    def n_samples(self) -> int:
        return self.trials[0].signal.shape[1]

    @property
    def trial_seconds(self) -> float:
        return self.n_samples / self.sampling_rate_hz

    @property
    def trial_ids(self) -> np.ndarray:
        return np.array([t.trial_id for t in self.trials], dtype=np.int64)

    def labels(self) -> np.ndarray:
        """Binary labels of all trials; raises DataError if any is missing."""
        missing = [t.trial_id for t in self.trials if t.binary_label is None]
        if missing:
            raise DataError(f"trials without binary_label: {missing}")
        return np.array([t.binary_label for t in self.trials], dtype=np.int64)


@dataclass(frozen=True)
class PhantomConfig:
    """Parameters of the null-signal generator.

    Each channel is an AR(1) process started from its stationary
    distribution.  A per-trial DC offset (shared by all channels), a per-trial
    per-channel log-normal amplitude and a fixed per-channel gain are then
    applied.  The amplitude term is what gives segments of one trial a shared
    band-power fingerprint; the DC offset alone is removed by mean detrending.
    """

    n_trials: int = 40
    trial_seconds: float = 60.0
    sampling_rate_hz: float = 128.0
    n_channels: int = 32
    ar_coefficient: float = 0.99
    noise_sd: float = 1.0
    trial_offset_sd: float = 2.0
    channel_gain_sd: float = 0.1
    trial_gain_sd: float = 0.25
    balanced: bool = True
    master_seed: int = 0

    def validate(self) -> "PhantomConfig":
        if self.n_trials < 1:
            raise ConfigError("n_trials", "must be >= 1")
        if self.n_channels < 1:
            raise ConfigError("n_channels", "must be >= 1")
        if self.trial_seconds <= 0:
            raise ConfigError("trial_seconds", "must be positive")
        if self.sampling_rate_hz <= 0:
            raise ConfigError("sampling_rate_hz", "must be positive")
        n_samples = self.trial_seconds * self.sampling_rate_hz
        if abs(n_samples - round(n_samples)) > 1e-9 or round(n_samples) < 1:
            raise ConfigError(
                "trial_seconds", f"trial_seconds * sampling_rate_hz = {n_samples} is not an integer"
            )
        if not 0.0 <= self.ar_coefficient < 1.0:
            raise ConfigError("ar_coefficient", "must lie in [0, 1)")
        if self.noise_sd <= 0:
            raise ConfigError("noise_sd", "must be positive")
        for name in ("trial_offset_sd", "channel_gain_sd", "trial_gain_sd"):
            if getattr(self, name) < 0:
                raise ConfigError(name, "must be >= 0")
        if self.balanced and self.n_trials % 2:
            raise ConfigError("n_trials", f"must be even for balanced labels, got {self.n_trials}")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed", "must be a 64-bit unsigned integer")
        return self

    @property
    def n_samples(self) -> int:
        return int(round(self.trial_seconds * self.sampling_rate_hz))


def generate_phantom(cfg: PhantomConfig) -> TrialSet:
    """Generate a labelled TrialSet whose labels carry no signal information.

    The output is a pure function of ``cfg``; equal configs give bit-identical
    signals.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.master_seed)
    T, C, S = cfg.n_trials, cfg.n_channels, cfg.n_samples
    phi, sd = cfg.ar_coefficient, cfg.noise_sd

    # draw order is part of the determinism contract
    if cfg.balanced:
        labels = np.repeat([0, 1], T // 2)
        rng.shuffle(labels)
    else:
        labels = rng.integers(0, 2, size=T)
    channel_gain = 1.0 + rng.normal(0.0, cfg.channel_gain_sd, size=C)
    trial_offset = rng.normal(0.0, cfg.trial_offset_sd, size=T)
    trial_gain = np.exp(rng.normal(0.0, cfg.trial_gain_sd, size=(T, C)))
    drive = rng.normal(0.0, sd, size=(T, C, S))
    drive[..., 0] = rng.normal(0.0, sd / math.sqrt(1.0 - phi * phi), size=(T, C))

    x = lfilter([1.0], [1.0, -phi], drive, axis=-1)
    x = x * trial_gain[..., None] + trial_offset[:, None, None]
    x *= channel_gain[None, :, None]

    return TrialSet.from_array(
        x,
        cfg.sampling_rate_hz,
        subject_id=f"phantom-{cfg.master_seed}",
        channel_names=[f"ch{c:02d}" for c in range(C)],
        labels=labels,
        provenance="phantom",
    )


@dataclass(frozen=True)
class SegmentSet:
    """Contiguous non-overlapping windows cut from every trial of a TrialSet.

    Rows are ordered trial by trial, and in temporal order within a trial.
    """

    parent_subject_id: str
    sampling_rate_hz: float
    channel_names: tuple
    segment_seconds: float
    segments_per_trial: int
    signals: np.ndarray  # (R, C, s)
    group_ids: np.ndarray  # (R,) parent trial ids
    labels: Optional[np.ndarray] = None  # (R,)

    def __len__(self):
        return self.signals.shape[0]


def segments_per_trial(ts: TrialSet, t: float) -> int:
    """Number of ``t``-second windows per trial; raises unless ``t`` divides the trial."""
    if t <= 0:
        raise PreconditionError(f"segment length must be positive, got {t}")
    duration = ts.trial_seconds
    if t > duration + 1e-9:
        raise PreconditionError(f"segment length {t} s exceeds trial duration {duration} s")
    seg_samples = t * ts.sampling_rate_hz
    if abs(seg_samples - round(seg_samples)) > 1e-9:
        raise PreconditionError(
            f"segment length {t} s is not a whole number of samples at {ts.sampling_rate_hz} Hz"
        )
    seg_samples = int(round(seg_samples))
    remainder = ts.n_samples % seg_samples
    if remainder:
        raise PreconditionError(
            f"segment length {t} s does not divide trial duration {duration:g} s "
            f"(remainder {remainder / ts.sampling_rate_hz:g} s)"
        )
    return ts.n_samples // seg_samples


def segment_trials(ts: TrialSet, t: float) -> SegmentSet:
    """Cut every trial into ``trial_seconds / t`` windows of ``t`` seconds."""
    n_per = segments_per_trial(ts, t)
    seg_samples = ts.n_samples // n_per
    T, C = ts.n_trials, ts.n_channels
    signals = (
        ts.signals.reshape(T, C, n_per, seg_samples)
        .transpose(0, 2, 1, 3)
        .reshape(T * n_per, C, seg_samples)
    )
    labels = None
    if all(tr.binary_label is not None for tr in ts.trials):
        labels = np.repeat(ts.labels(), n_per)
    return SegmentSet(
        parent_subject_id=ts.subject_id,
        sampling_rate_hz=ts.sampling_rate_hz,
        channel_names=ts.channel_names,
        segment_seconds=float(t),
        segments_per_trial=n_per,
        signals=np.ascontiguousarray(signals),
        group_ids=np.repeat(ts.trial_ids, n_per),
        labels=labels,
    )


def binarize_labels(ts: TrialSet, axis: str, threshold: float = 5.0) -> TrialSet:
    """Label each trial 0 (rating <= threshold) or 1 (rating > threshold)."""
    missing = [t.trial_id for t in ts.trials if not t.ratings or axis not in t.ratings]
    if missing:
        raise DataError(f"trials missing a {axis!r} rating: {missing}")
    trials = tuple(
        replace(t, binary_label=int(t.ratings[axis] > threshold)) for t in ts.trials
    )
    return replace(ts, trials=trials)


def save_trialset(ts: TrialSet, path) -> None:
    """Write ``ts`` as ``meta.json`` + ``signals.f32`` under directory ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    trials_meta = []
    for t in ts.trials:
        entry = {"trial_id": t.trial_id}
        if t.ratings:
            entry["ratings"] = {k: float(v) for k, v in t.ratings.items()}
        if t.binary_label is not None:
            entry["binary_label"] = int(t.binary_label)
        trials_meta.append(entry)
    meta = {
        "format_version": FORMAT_VERSION,
        "subject_id": ts.subject_id,
        "sampling_rate_hz": ts.sampling_rate_hz,
        "channel_names": list(ts.channel_names),
        "trial_seconds": ts.trial_seconds,
        "trials": trials_meta,
        "byte_order": "little",
        "dtype": "f32",
        "layout": LAYOUT,
        "provenance": ts.provenance,
    }
    payload = ts.signals.astype("<f4", copy=False).tobytes(order="C")
    (path / SIGNAL_FILE).write_bytes(payload)
    (path / META_FILE).write_text(json.dumps(meta, indent=2), encoding="utf-8")


def load_trialset(path) -> TrialSet:
    """Read a directory written by :func:`save_trialset`."""
    path = Path(path)
    try:
        meta = json.loads((path / META_FILE).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path / META_FILE}: malformed JSON ({exc})") from exc
    if not isinstance(meta, dict):
        raise FormatError(f"{path / META_FILE}: expected a JSON object")

    version = meta.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format_version {version!r}")
    try:
        fs = float(meta["sampling_rate_hz"])
        channel_names = [str(c) for c in meta["channel_names"]]
        trial_seconds = float(meta["trial_seconds"])
        trials_meta = list(meta["trials"])
        subject_id = str(meta["subject_id"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path / META_FILE}: missing or invalid field ({exc})") from exc
    if meta.get("byte_order", "little") != "little" or meta.get("dtype", "f32") != "f32":
        raise FormatError("only little-endian f32 payloads are supported")
    if meta.get("layout", LAYOUT) != LAYOUT:
        raise FormatError(f"unsupported layout {meta.get('layout')!r}")

    n_samples = trial_seconds * fs
    if abs(n_samples - round(n_samples)) > 1e-6 or fs <= 0:
        raise FormatError(f"trial_seconds * sampling_rate_hz = {n_samples} is not an integer")
    T, C, S = len(trials_meta), len(channel_names), int(round(n_samples))

    payload = (path / SIGNAL_FILE).read_bytes()
    per_trial = C * S * 4
    if len(payload) != T * per_trial:
        if per_trial and len(payload) % per_trial == 0:
            raise FormatError(
                f"shape mismatch: meta declares {T} trials, payload holds {len(payload) // per_trial}"
            )
        raise FormatError(
            f"size mismatch: expected {T * per_trial} bytes for shape ({T}, {C}, {S}), "
            f"got {len(payload)}"
        )
    signals = np.frombuffer(payload, dtype="<f4").reshape(T, C, S).astype(np.float32)

    try:
        ids = [int(m["trial_id"]) for m in trials_meta]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"trial entry without a valid trial_id ({exc})") from exc
    labels = [m.get("binary_label") for m in trials_meta]
    ratings = [m.get("ratings") for m in trials_meta]
    trials = tuple(
        Trial(
            tid,
            signals[i],
            dict(ratings[i]) if ratings[i] else None,
            None if labels[i] is None else int(labels[i]),
        )
        for i, tid in enumerate(ids)
    )
    return TrialSet(
        subject_id=subject_id,
        sampling_rate_hz=fs,
        channel_names=tuple(channel_names),
        trials=trials,
        provenance=meta.get("provenance", "imported"),
    )
