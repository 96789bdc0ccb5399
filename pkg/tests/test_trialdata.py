import json

import numpy as np
import pytest

from leakbench import (
    ConfigError,
    DataError,
    FormatError,
    PhantomConfig,
    PreconditionError,
    TrialSet,
    binarize_labels,
    generate_phantom,
    load_trialset,
    save_trialset,
    segment_trials,
)


def lag1(x):
    x = x - x.mean()
    return float(np.dot(x[:-1], x[1:]) / np.dot(x, x))


def quiet(**kw):
    """Phantom with every trial/channel nuisance term switched off."""
    base = dict(n_channels=2, n_trials=2, trial_offset_sd=0.0, channel_gain_sd=0.0, trial_gain_sd=0.0)
    base.update(kw)
    return PhantomConfig(**base)


def test_generate_is_deterministic():
    cfg = PhantomConfig(n_trials=4, n_channels=3, trial_seconds=2, master_seed=42)
    a, b = generate_phantom(cfg), generate_phantom(cfg)
    assert a.signals.tobytes() == b.signals.tobytes()
    assert np.array_equal(a.labels(), b.labels())
    c = generate_phantom(PhantomConfig(n_trials=4, n_channels=3, trial_seconds=2, master_seed=43))
    assert a.signals.tobytes() != c.signals.tobytes()


def test_default_geometry(phantom):
    assert phantom.signals.shape == (40, 32, 7680)
    assert phantom.signals.dtype == np.float32
    assert phantom.trial_seconds == 60
    assert phantom.provenance == "phantom"


def test_white_noise_has_no_lag1_correlation():
    ts = generate_phantom(quiet(ar_coefficient=0.0, master_seed=3))
    for signal in ts.signals.reshape(-1, ts.n_samples):
        assert abs(lag1(signal.astype(np.float64))) < 0.05


def test_ar_coefficient_recovered():
    r = [lag1(generate_phantom(quiet(master_seed=s)).signals[0, 0].astype(np.float64)) for s in range(10)]
    assert abs(np.mean(r) - 0.99) <= 0.01
    assert all(abs(v - 0.99) <= 0.01 for v in r)


def test_stationary_variance():
    phi = 0.9
    target = 1.0 / (1 - phi**2)
    for seed in range(10):
        x = generate_phantom(quiet(ar_coefficient=phi, master_seed=seed)).signals[0, 0]
        assert abs(x.var() / target - 1) < 0.10


def test_balanced_labels(phantom):
    assert np.bincount(phantom.labels()).tolist() == [20, 20]


@pytest.mark.parametrize(
    "field, value",
    [("ar_coefficient", 1.0), ("noise_sd", 0.0), ("trial_offset_sd", -1.0), ("n_trials", 41)],
)
def test_invalid_config_names_field(field, value):
    with pytest.raises(ConfigError) as info:
        generate_phantom(PhantomConfig(**{field: value}))
    assert info.value.field == field


def test_segmentation_counts(phantom):
    seg = segment_trials(phantom, 1)
    assert seg.signals.shape == (2400, 32, 128)
    assert seg.segments_per_trial == 60


def test_segmentation_identity(phantom):
    seg = segment_trials(phantom, 60)
    assert seg.segments_per_trial == 1
    assert np.array_equal(seg.signals, phantom.signals)
    assert np.array_equal(seg.group_ids, phantom.trial_ids)


def test_non_divisor_reports_remainder(phantom):
    with pytest.raises(PreconditionError, match="remainder 4"):
        segment_trials(phantom, 7)


def test_segments_longer_than_trial_rejected(phantom):
    with pytest.raises(PreconditionError):
        segment_trials(phantom, 120)


@pytest.mark.parametrize("t", [1, 5, 12, 30])
def test_segments_reconstruct_trials(phantom, t):
    seg = segment_trials(phantom, t)
    n = seg.segments_per_trial
    for trial_index in (0, 17, 39):
        pieces = seg.signals[trial_index * n : (trial_index + 1) * n]
        assert np.array_equal(np.concatenate(list(pieces), axis=-1), phantom.signals[trial_index])


def test_label_inheritance(phantom):
    seg = segment_trials(phantom, 4)
    by_trial = dict(zip(phantom.trial_ids.tolist(), phantom.labels().tolist()))
    assert all(by_trial[g] == lab for g, lab in zip(seg.group_ids.tolist(), seg.labels.tolist()))


def rated(values, axis="valence"):
    x = np.zeros((len(values), 1, 16))
    return TrialSet.from_array(x, 8.0, ratings=[{axis: v} for v in values])


def test_binarize_threshold_rule():
    ts = binarize_labels(rated([5.0, 5.01, 9.0, 1.0]), "valence")
    assert ts.labels().tolist() == [0, 1, 1, 0]
    assert ts.trials[1].ratings == {"valence": 5.01}


def test_binarize_missing_axis_lists_trials():
    with pytest.raises(DataError, match=r"\[0, 1\]"):
        binarize_labels(rated([3.0, 7.0]), "arousal")


def test_rating_range_enforced():
    with pytest.raises(DataError):
        rated([9.5])


def test_unlabelled_set_refuses_labels():
    with pytest.raises(DataError):
        rated([3.0]).labels()


def two_by_two():
    rng = np.random.default_rng(0)
    return TrialSet.from_array(
        rng.normal(size=(2, 2, 32)),
        16.0,
        subject_id="s01",
        channel_names=["Fp1", "Fp2"],
        trial_ids=[3, 8],
        labels=[1, 0],
        ratings=[{"valence": 7.5}, {"valence": 2.0}],
    )


def test_round_trip_bit_exact(tmp_path):
    ts = two_by_two()
    save_trialset(ts, tmp_path / "d")
    back = load_trialset(tmp_path / "d")
    assert back.signals.tobytes() == ts.signals.tobytes()
    assert back.channel_names == ts.channel_names
    assert back.trial_ids.tolist() == [3, 8]
    assert back.labels().tolist() == [1, 0]
    assert back.trials[0].ratings == {"valence": 7.5}
    assert back.sampling_rate_hz == 16.0 and back.subject_id == "s01"


def test_meta_layout(tmp_path):
    save_trialset(two_by_two(), tmp_path)
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["format_version"] == 1
    assert meta["byte_order"] == "little" and meta["dtype"] == "f32"
    assert meta["layout"] == "trial-major then channel-major then sample"
    assert (tmp_path / "signals.f32").stat().st_size == 2 * 2 * 32 * 4


def test_truncated_payload(tmp_path):
    save_trialset(two_by_two(), tmp_path)
    data = (tmp_path / "signals.f32").read_bytes()
    (tmp_path / "signals.f32").write_bytes(data[:-4])
    with pytest.raises(FormatError, match="size mismatch"):
        load_trialset(tmp_path)


def test_meta_declares_extra_trial(tmp_path):
    save_trialset(two_by_two(), tmp_path)
    meta = json.loads((tmp_path / "meta.json").read_text())
    meta["trials"].append({"trial_id": 99})
    (tmp_path / "meta.json").write_text(json.dumps(meta))
    with pytest.raises(FormatError, match="shape mismatch: meta declares 3 trials, payload holds 2"):
        load_trialset(tmp_path)


def test_bad_version_and_malformed_meta(tmp_path):
    save_trialset(two_by_two(), tmp_path)
    meta = json.loads((tmp_path / "meta.json").read_text())
    meta["format_version"] = 2
    (tmp_path / "meta.json").write_text(json.dumps(meta))
    with pytest.raises(FormatError, match="format_version"):
        load_trialset(tmp_path)
    (tmp_path / "meta.json").write_text("{not json")
    with pytest.raises(FormatError):
        load_trialset(tmp_path)
