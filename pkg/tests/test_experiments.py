import json

import numpy as np
import pytest

from leakbench import ConfigError, DataError, KnnConfig, PhantomConfig, PreconditionError
from leakbench.experiments import (
    ExperimentReport,
    SegExpConfig,
    SelExpConfig,
    TuneExpConfig,
    derive_seed,
    from_dict,
    run_inflation_suite,
    run_segmentation_experiment,
    run_selection_experiment,
    run_tuning_experiment,
    summarize,
    to_dict,
    write_report_files,
)

from conftest import separable_trialset

SMALL_PHANTOM = PhantomConfig(n_trials=20, trial_seconds=8, n_channels=4)
SMALL_SEG = SegExpConfig(segment_seconds=(8, 2, 1))
SMALL_SEL = SelExpConfig(feature_counts=(2, 4, 8, 16))
SMALL_TUNE = TuneExpConfig(k_values=(1, 3, 5))


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(1, "phantom", 0) == derive_seed(1, "phantom", 0)
    seeds = {derive_seed(m, tag, i) for m in (0, 1) for tag in ("a", "b") for i in range(5)}
    assert len(seeds) == 20
    assert all(0 <= s < 2**64 for s in seeds)


def test_derive_seed_rule():
    import hashlib

    expected = int.from_bytes(hashlib.blake2b(b"7:tuning:3", digest_size=8).digest(), "little")
    assert derive_seed(7, "tuning", 3) == expected


def test_config_validation():
    with pytest.raises(ConfigError):
        SelExpConfig(feature_counts=(10, 5))
    with pytest.raises(ConfigError):
        SelExpConfig(global_count_policy="peek")
    with pytest.raises(ConfigError):
        TuneExpConfig(k_values=())
    with pytest.raises(ConfigError):
        SegExpConfig(bands="SIX")


def test_count_grid():
    assert SelExpConfig().count_grid(128) == (5, 10, 15, 20, 30, 40, 60, 80, 100, 128)
    assert SelExpConfig().count_grid(16) == (5, 10, 15, 16)
    with pytest.raises(ConfigError):
        SelExpConfig(feature_counts=(5, 200)).count_grid(128)


def test_tuning_grid_size_and_order():
    grid = TuneExpConfig().grid()
    assert len(grid) == 56
    assert grid[0] == KnnConfig(1, "euclidean", False)
    assert grid[4] == KnnConfig(1, "euclidean", True)
    assert grid[-1] == KnnConfig(25, "cosine", True)


def test_config_dict_round_trip():
    cfg = TuneExpConfig(k_values=(3, 5), metrics=("cosine",))
    assert from_dict(TuneExpConfig, json.loads(json.dumps(to_dict(cfg)))) == cfg
    seg = from_dict(SegExpConfig, {"segment_seconds": [30, 1], "knn": {"k": 3}})
    assert seg.segment_seconds == (30, 1) and seg.knn.k == 3
    with pytest.raises(ConfigError):
        from_dict(SegExpConfig, {"bogus": 1})


def test_segmentation_report(small_phantom):
    rep = run_segmentation_experiment(small_phantom, SMALL_SEG, seed=3)
    assert rep.kind == "segmentation"
    assert set(rep.arms) == {"kfold_rowwise", "leave_one_group_out"}
    assert list(rep.arms["kfold_rowwise"]) == ["1", "4", "8"]
    leaky = {(r["scheme"], r["segments_per_trial"]): r["leaky"] for r in rep.records}
    assert leaky[("kfold_rowwise", 4)] and leaky[("kfold_rowwise", 8)]
    assert not leaky[("kfold_rowwise", 1)]
    assert not any(v for (s, _), v in leaky.items() if s == "leave_one_group_out")
    # deltas recomputable from the stored arms
    for n in ("1", "4", "8"):
        want = rep.arms["kfold_rowwise"][n]["mean_accuracy"] - rep.arms["leave_one_group_out"][n]["mean_accuracy"]
        assert rep.deltas[f"accuracy@N={n}"] == pytest.approx(want)


def test_segmentation_aborts_before_compute(small_phantom):
    with pytest.raises(PreconditionError, match="3"):
        run_segmentation_experiment(small_phantom, SegExpConfig(segment_seconds=(8, 3)), seed=0)


def test_selection_pairing_and_deltas(small_phantom):
    rep = run_selection_experiment(small_phantom, SMALL_SEL, seed=2)
    g, loc = rep.arms["global"], rep.arms["local"]
    assert g["split_hash"] == loc["split_hash"] and g["features_hash"] == loc["features_hash"]
    assert g["n_test"] == loc["n_test"] == 6
    assert g["chosen_count"] in (2, 4, 8, 16) and loc["chosen_count"] in (2, 4, 8, 16)
    assert rep.deltas["accuracy"] == pytest.approx(g["accuracy"] - loc["accuracy"])
    # test_max reports the best point of its own test curve
    assert g["accuracy"] == max(g["count_curve"])


def test_selection_all_features_separable():
    ts = separable_trialset(n_trials=20, n_channels=4, seconds=4)
    rep = run_selection_experiment(
        ts, SelExpConfig(feature_counts=(16,), global_count_policy="nested"), seed=0
    )
    assert rep.arms["global"]["accuracy"] == 1.0
    assert rep.arms["local"]["accuracy"] == 1.0
    assert rep.arms["global"]["chosen_count"] == rep.arms["local"]["chosen_count"] == 16


def test_selection_grid_above_features(small_phantom):
    with pytest.raises(ConfigError):
        run_selection_experiment(small_phantom, SelExpConfig(feature_counts=(5, 17)), seed=0)


def test_tuning_single_config_forces_equality(small_phantom):
    cfg = TuneExpConfig(k_values=(3,), standardize=(True,), metrics=("manhattan",))
    rep = run_tuning_experiment(small_phantom, cfg, seed=4)
    assert rep.arms["wrong"]["accuracy"] == rep.arms["correct"]["accuracy"]
    assert rep.arms["wrong"]["balanced_accuracy"] == rep.arms["correct"]["balanced_accuracy"]
    assert rep.deltas["accuracy"] == 0.0


def test_tuning_wrong_arm_is_test_maximum(small_phantom):
    rep = run_tuning_experiment(small_phantom, SMALL_TUNE, seed=1)
    wrong = rep.arms["wrong"]
    assert len(wrong["test_curve"]) == 24
    assert wrong["accuracy"] == max(wrong["test_curve"])
    assert rep.arms["wrong"]["split_hash"] == rep.arms["correct"]["split_hash"]


def test_tuning_k_beyond_train_size(small_phantom):
    with pytest.raises(DataError):
        run_tuning_experiment(small_phantom, TuneExpConfig(k_values=(1, 25)), seed=0)


def test_tuning_mode_subset(small_phantom):
    rep = run_tuning_experiment(small_phantom, TuneExpConfig(modes=("correct",), k_values=(1, 3)), seed=0)
    assert set(rep.arms) == {"correct"} and not rep.deltas


def suite(**kw):
    args = dict(n_seeds=2, master_seed=9, phantom=SMALL_PHANTOM, seg=SMALL_SEG, sel=SMALL_SEL, tune=SMALL_TUNE)
    args.update(kw)
    return run_inflation_suite(**args)


def test_suite_needs_two_seeds():
    with pytest.raises(PreconditionError):
        suite(n_seeds=1)


def test_suite_deterministic_minus_timing():
    a, b = suite(), suite()
    assert a.to_json(include_timing=False) == b.to_json(include_timing=False)
    assert "wall_time_s" not in a.to_json(include_timing=False)


def test_suite_jobs_do_not_change_content():
    assert suite(jobs=2).to_json(include_timing=False) == suite(jobs=1).to_json(include_timing=False)


def test_suite_structure():
    rep = suite(n_seeds=3)
    assert rep.kind == "suite"
    assert len(rep.records) == 3 and not rep.failures
    assert rep.seeds["children"] == [derive_seed(9, "phantom", i) for i in range(3)]
    chance = rep.checks["chance"]
    assert {"selection/local", "tuning/correct"} <= set(chance)
    assert any(k.startswith("segmentation/leave_one_group_out@N=") for k in chance)
    leak = rep.checks["leakage"]
    assert leak["kfold_segments_leaky"] == 3 and leak["valid_clean"] == 3
    assert leak["selection_paired_splits"] and leak["tuning_paired_splits"]
    stats = rep.arms["tuning"]["wrong"]["accuracy"]
    vals = [r["tuning"]["arms"]["wrong"]["accuracy"] for r in rep.records]
    assert stats["mean"] == pytest.approx(np.mean(vals)) and stats["n"] == 3


def test_suite_isolates_failing_seed():
    # k=15 exceeds the 14 training trials of every seed; each seed fails on its own
    rep = suite(experiments=("tuning",), tune=TuneExpConfig(k_values=(15,)))
    assert len(rep.failures) == 2 and "DataError" in rep.failures[0]["error"]


def test_report_json_round_trip(tmp_path, small_phantom):
    rep = run_tuning_experiment(small_phantom, SMALL_TUNE, seed=1)
    path = rep.save(tmp_path / "r.json")
    back = ExperimentReport.load(path)
    assert back.to_json() == rep.to_json()


def test_summarize_segmentation_csv(small_phantom):
    rep = run_segmentation_experiment(small_phantom, SMALL_SEG, seed=0)
    _, csvs = summarize(rep)
    lines = csvs["curve"].splitlines()
    assert lines[0].startswith("segments_per_trial,scheme,mean_acc,sd")
    assert len(lines) == 1 + 3 * 2


def test_summarize_tuning_table(small_phantom):
    rep = run_tuning_experiment(small_phantom, SMALL_TUNE, seed=0)
    md, csvs = summarize(rep)
    table = [line for line in md.splitlines() if line.startswith("|")]
    assert "Wrong" in table[0] and "Correct" in table[0]
    assert table[2].startswith("| Regular accuracy") and table[3].startswith("| Balanced accuracy")
    assert len(csvs["table"].splitlines()) == 3
    wrong_pct = f"{100 * rep.arms['wrong']['accuracy']:.2f}"
    assert wrong_pct in table[2]


def test_summarize_empty_report():
    rep = ExperimentReport(kind="segmentation", config={}, seeds={}, arms={}, deltas={}, records=[])
    _, csvs = summarize(rep)
    assert csvs["curve"].splitlines() == ["segments_per_trial,scheme,mean_acc,sd,mean_bal_acc"]


def test_write_report_files(tmp_path, small_phantom):
    rep = run_selection_experiment(small_phantom, SMALL_SEL, seed=0)
    write_report_files(rep, tmp_path, "selection_0")
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["selection_0.report.json", "selection_0.table.csv", "selection_0.table.md"]
