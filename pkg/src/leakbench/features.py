"""Welch PSD, band-power integration, feature matrices and standardization."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .errors import DataError, PreconditionError
from .trialdata import SegmentSet, TrialSet

MIN_SECTION_LENGTH = 8
# bound on the (rows, channels, sections, nfft) working array in extract_features
_CHUNK_ELEMENTS = 1 << 20


@dataclass(frozen=True)
class WelchParams:
    """Welch settings: the section length follows from the signal length.

    With ``n_sections`` sections overlapping by ``overlap_fraction``, a length-S
    signal gets sections of ``floor(S / (n_sections*(1-overlap) + overlap))``
    samples, zero-padded to the next power of two.
    """

    n_sections: int = 8
    overlap_fraction: float = 0.5
    window: str = "hamming"
    detrend: str = "mean"

    def __post_init__(self):
        if self.n_sections < 1:
            raise PreconditionError("n_sections must be >= 1")
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise PreconditionError("overlap_fraction must lie in [0, 1)")
        if self.window != "hamming":
            raise PreconditionError(f"unsupported window {self.window!r}")
        if self.detrend not in ("none", "mean"):
            raise PreconditionError(f"unsupported detrend {self.detrend!r}")

    def section_length(self, n_samples: int) -> int:
        span = self.n_sections * (1.0 - self.overlap_fraction) + self.overlap_fraction
        return int(np.floor(n_samples / span + 1e-9))

    def layout(self, n_samples: int):
        """Return ``(section_length, n_overlap, n_sections, fft_length)`` for a signal length."""
        length = self.section_length(n_samples)
        if length < MIN_SECTION_LENGTH:
            raise PreconditionError(
                f"signal of {n_samples} samples gives Welch sections of {length} < "
                f"{MIN_SECTION_LENGTH} samples"
            )
        n_overlap = int(np.floor(self.overlap_fraction * length))
        step = length - n_overlap
        count = (n_samples - n_overlap) // step
        nfft = 1 << (length - 1).bit_length()
        return length, n_overlap, count, nfft


@dataclass(frozen=True)
class Spectrum:
    """One-sided power spectral density; ``psd`` may carry leading batch axes."""

    freqs: np.ndarray
    psd: np.ndarray

    @property
    def resolution(self) -> float:
        return float(self.freqs[1] - self.freqs[0])


def welch_psd(signal, fs: float, params: WelchParams = WelchParams()) -> Spectrum:
    """Welch estimate of the one-sided PSD of ``signal`` along its last axis.

    Density scaling: ``sum(psd) * df`` approximates the variance of a detrended
    input.  Leading axes are treated as independent signals.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.shape[-1] == 0:
        raise PreconditionError("empty signal")
    if not np.all(np.isfinite(x)):
        raise DataError("signal contains non-finite values")
    length, n_overlap, _, nfft = params.layout(x.shape[-1])
    # np.hamming is the symmetric window; scipy's named "hamming" is periodic
    freqs, psd = sps.welch(
        x,
        fs,
        window=np.hamming(length),
        noverlap=n_overlap,
        nfft=nfft,
        detrend="constant" if params.detrend == "mean" else False,
        scaling="density",
        axis=-1,
    )
    return Spectrum(freqs, psd)


@dataclass(frozen=True)
class Band:
    name: str
    f_lo: float
    f_hi: float


@dataclass(frozen=True)
class BandSet:
    """Ordered, non-overlapping frequency bands, each ``[f_lo, f_hi)``."""

    name: str
    bands: tuple

    def __post_init__(self):
        ordered = sorted(self.bands, key=lambda b: b.f_lo)
        for b in ordered:
            if not b.f_lo < b.f_hi:
                raise PreconditionError(f"band {b.name}: f_lo must be below f_hi")
        for a, b in zip(ordered, ordered[1:]):
            if b.f_lo < a.f_hi:
                raise PreconditionError(f"bands {a.name} and {b.name} overlap")

    def __len__(self):
        return len(self.bands)

    def __iter__(self):
        return iter(self.bands)

    @property
    def names(self):
        return [b.name for b in self.bands]


FIVE_BANDS = BandSet(
    "FIVE",
    (
        Band("delta", 1.0, 4.0),
        Band("theta", 4.0, 8.0),
        Band("alpha", 8.0, 14.0),
        Band("beta", 14.0, 30.0),
        Band("gamma", 30.0, 42.0),
    ),
)
FOUR_BANDS = BandSet("FOUR", FIVE_BANDS.bands[1:])
BAND_PRESETS = {"FIVE": FIVE_BANDS, "FOUR": FOUR_BANDS}


def band_power(spectrum: Spectrum, bands: BandSet) -> np.ndarray:
    """Integrate ``psd * df`` over the bins of each band; shape ``(..., len(bands))``."""
    freqs = spectrum.freqs
    nyquist = freqs[-1]
    df = spectrum.resolution
    out = []
    for b in bands:
        if b.f_hi > nyquist + 1e-9:
            raise PreconditionError(f"band {b.name} ends at {b.f_hi} Hz, above Nyquist {nyquist} Hz")
        mask = (freqs >= b.f_lo) & (freqs < b.f_hi)
        out.append(spectrum.psd[..., mask].sum(axis=-1) * df)
    return np.stack(out, axis=-1)


@dataclass(frozen=True)
class FeatureMatrix:
    """Rows are trials or segments; columns are channel x band powers, channel-major."""

    values: np.ndarray
    column_names: tuple
    group_ids: np.ndarray
    labels: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.ndim != 2:
            raise DataError("feature values must be 2-D")
        rows, cols = self.values.shape
        if cols != len(self.column_names):
            raise DataError("column_names length does not match the number of columns")
        if len(self.group_ids) != rows or len(self.labels) != rows:
            raise DataError("group_ids and labels must have one entry per row")
        if not np.all(np.isfinite(self.values)):
            raise DataError("feature matrix contains non-finite values")

    @property
    def shape(self):
        return self.values.shape

    def take_rows(self, rows) -> "FeatureMatrix":
        rows = np.asarray(rows)
        return FeatureMatrix(
            self.values[rows], self.column_names, self.group_ids[rows], self.labels[rows], dict(self.meta)
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([*self.column_names, "group_id", "label"])
        for row, gid, lab in zip(self.values, self.group_ids, self.labels):
            writer.writerow([*(f"{v:.9g}" for v in row), int(gid), int(lab)])
        return buf.getvalue()


def extract_features(
    data,
    bands: BandSet = FOUR_BANDS,
    params: WelchParams = WelchParams(),
) -> FeatureMatrix:
    """Band powers of every channel of every trial (or segment)."""
    if isinstance(data, TrialSet):
        signals = data.signals
        group_ids = data.trial_ids
        labels = data.labels()
        meta = {"segment_seconds": data.trial_seconds, "segments_per_trial": 1}
    elif isinstance(data, SegmentSet):
        if data.labels is None:
            raise DataError("segments carry no binary labels")
        signals = data.signals
        group_ids = data.group_ids
        labels = data.labels
        meta = {"segment_seconds": data.segment_seconds, "segments_per_trial": data.segments_per_trial}
    else:
        raise TypeError(f"expected TrialSet or SegmentSet, got {type(data).__name__}")
    fs = data.sampling_rate_hz
    meta.update(band_preset=bands.name, sampling_rate_hz=fs)

    n_rows, n_channels, n_samples = signals.shape
    _, _, count, nfft = params.layout(n_samples)
    per_row = max(1, n_channels * count * nfft)
    chunk = max(1, _CHUNK_ELEMENTS // per_row)
    out = np.empty((n_rows, n_channels, len(bands)))
    for start in range(0, n_rows, chunk):
        spec = welch_psd(signals[start : start + chunk], fs, params)
        out[start : start + chunk] = band_power(spec, bands)

    names = tuple(f"{ch}:{b}" for ch in data.channel_names for b in bands.names)
    return FeatureMatrix(
        out.reshape(n_rows, -1),
        names,
        np.asarray(group_ids, dtype=np.int64),
        np.asarray(labels, dtype=np.int64),
        meta,
    )


@dataclass(frozen=True)
class Standardizer:
    """Column means and sample sds (ddof=1) from a designated row subset."""

    mean: np.ndarray
    sd: np.ndarray
    constant: np.ndarray  # bool mask of columns passed through unchanged
    fit_rows: np.ndarray


def fit_standardizer(X, rows=None) -> Standardizer:
    """Fit on ``X[rows]`` only (all rows when ``rows`` is None)."""
    X = np.asarray(X, dtype=np.float64)
    rows = np.arange(X.shape[0]) if rows is None else np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        raise PreconditionError("cannot fit a standardizer on an empty row set")
    sub = X[rows]
    mean = sub.mean(axis=0)
    if sub.shape[0] > 1:
        sd = sub.std(axis=0, ddof=1)
    else:
        sd = np.zeros(X.shape[1])
    constant = ~(sd > 0)
    return Standardizer(mean, np.where(constant, 1.0, sd), constant, rows)


def apply_standardizer(std: Standardizer, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    out = (X - std.mean) / std.sd
    if std.constant.any():
        out[:, std.constant] = X[:, std.constant]
    return out
