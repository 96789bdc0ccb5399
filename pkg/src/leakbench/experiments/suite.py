"""Monte Carlo inflation suite over freshly generated phantom datasets."""

from __future__ import annotations

import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from ..errors import PreconditionError
from ..evaluation import chance_level_check
from ..trialdata import PhantomConfig, generate_phantom
from ._common import mean_sd
from .config import SegExpConfig, SelExpConfig, TuneExpConfig, derive_seed, to_dict
from .report import ExperimentReport
from .segmentation import INVALID, VALID, run_segmentation_experiment
from .selection import run_selection_experiment
from .tuning import run_tuning_experiment

EXPERIMENTS = ("segmentation", "selection", "tuning")
VALID_ARMS = {"selection": "local", "tuning": "correct"}
INVALID_ARMS = {"selection": "global", "tuning": "wrong"}


def _run_one_seed(index, master_seed, phantom, seg, sel, tune, experiments):
    phantom_seed = derive_seed(master_seed, "phantom", index)
    out = {"seed_index": index, "phantom_seed": phantom_seed}
    ts = generate_phantom(replace(phantom, master_seed=phantom_seed))
    if "segmentation" in experiments:
        s = derive_seed(master_seed, "segmentation", index)
        out["segmentation"] = run_segmentation_experiment(ts, seg, s).to_dict()
    if "selection" in experiments:
        s = derive_seed(master_seed, "selection", index)
        out["selection"] = run_selection_experiment(ts, sel, s).to_dict()
    if "tuning" in experiments:
        s = derive_seed(master_seed, "tuning", index)
        out["tuning"] = run_tuning_experiment(ts, tune, s).to_dict()
    return out


def _guarded(args):
    try:
        return _run_one_seed(*args)
    except Exception as exc:  # per-seed isolation: one bad seed must not sink the suite
        return {"seed_index": args[0], "error": f"{type(exc).__name__}: {exc}",
                "traceback": traceback.format_exc(limit=5)}


def _stat(values):
    mean, sd = mean_sd(values)
    return {"mean": mean, "sd": sd, "n": len(values)}


def run_inflation_suite(
    n_seeds: int = 20,
    master_seed: int = 0,
    phantom: PhantomConfig = PhantomConfig(),
    seg: SegExpConfig = SegExpConfig(),
    sel: SelExpConfig = SelExpConfig(),
    tune: TuneExpConfig = TuneExpConfig(),
    experiments=EXPERIMENTS,
    jobs: int = 1,
) -> ExperimentReport:
    """Run the chosen experiments on ``n_seeds`` phantom datasets and aggregate.

    Child seeds come from :func:`derive_seed`, so the report content depends
    only on the configs and ``master_seed``, never on ``jobs``.
    """
    if n_seeds < 2:
        raise PreconditionError(f"the suite needs at least 2 seeds, got {n_seeds}")
    unknown = set(experiments) - set(EXPERIMENTS)
    if unknown:
        raise PreconditionError(f"unknown experiments {sorted(unknown)}")
    experiments = tuple(e for e in EXPERIMENTS if e in experiments)
    phantom.validate()
    start = time.perf_counter()
    tasks = [(i, master_seed, phantom, seg, sel, tune, experiments) for i in range(n_seeds)]
    jobs = max(1, min(jobs or os.cpu_count() or 1, n_seeds))
    if jobs == 1:
        results = [_guarded(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_guarded, tasks))
    results.sort(key=lambda r: r["seed_index"])

    ok = [r for r in results if "error" not in r]
    failures = [r for r in results if "error" in r]
    arms, deltas, chance = {}, {}, {}
    per_seed_flags = {r["seed_index"]: [] for r in ok}
    valid_clean = {r["seed_index"]: [] for r in ok}
    leakage = {"kfold_segments_leaky": 0, "n_seeds": len(ok)}

    if "segmentation" in experiments and ok:
        arms["segmentation"] = {}
        for scheme in (INVALID, VALID):
            # segments/trial keys appear in config order in every seed's report
            n_keys = list(ok[0]["segmentation"]["arms"][scheme])
            arms["segmentation"][scheme] = {
                n: {
                    "accuracy": _stat([r["segmentation"]["arms"][scheme][n]["mean_accuracy"] for r in ok]),
                    "balanced_accuracy": _stat(
                        [r["segmentation"]["arms"][scheme][n]["mean_balanced_accuracy"] for r in ok]
                    ),
                }
                for n in n_keys
            }
        deltas["segmentation"] = {
            key: _stat([r["segmentation"]["deltas"][key] for r in ok])
            for key in ok[0]["segmentation"]["deltas"]
        }
        for n in arms["segmentation"][VALID]:
            name = f"segmentation/{VALID}@N={n}"
            flags = []
            for r in ok:
                rec = r["segmentation"]["arms"][VALID][n]
                flag = chance_level_check(rec["mean_accuracy"], rec["sd_accuracy"]).flagged
                flags.append(flag)
                per_seed_flags[r["seed_index"]].append(flag)
            stats = arms["segmentation"][VALID][n]["accuracy"]
            chance[name] = _chance_entry(stats, flags)
        for r in ok:
            records = r["segmentation"]["records"]
            valid_clean[r["seed_index"]].append(all(not x["leaky"] for x in records if x["scheme"] == VALID))
            leakage["kfold_segments_leaky"] += all(
                x["leaky"] for x in records if x["scheme"] == INVALID and x["segments_per_trial"] >= 2
            )

    for exp in ("selection", "tuning"):
        if exp not in experiments or not ok:
            continue
        arm_names = [a for a in (INVALID_ARMS[exp], VALID_ARMS[exp]) if a in ok[0][exp]["arms"]]
        arms[exp] = {
            a: {m: _stat([r[exp]["arms"][a][m] for r in ok]) for m in ("accuracy", "balanced_accuracy")}
            for a in arm_names
        }
        if ok[0][exp]["deltas"]:
            deltas[exp] = {m: _stat([r[exp]["deltas"][m] for r in ok]) for m in ("accuracy", "balanced_accuracy")}
        valid = VALID_ARMS[exp]
        if valid in arm_names:
            flags = []
            for r in ok:
                arm = r[exp]["arms"][valid]
                flag = chance_level_check(arm["accuracy"], arm["test_binomial_sd"]).flagged
                flags.append(flag)
                per_seed_flags[r["seed_index"]].append(flag)
            chance[f"{exp}/{valid}"] = _chance_entry(arms[exp][valid]["accuracy"], flags)
        for r in ok:
            valid_clean[r["seed_index"]].append(not r[exp]["arms"][arm_names[-1]]["split_leaky"])
        paired = all(
            len({r[exp]["arms"][a]["split_hash"] for a in arm_names}) == 1
            and len({r[exp]["arms"][a]["features_hash"] for a in arm_names}) == 1
            for r in ok
        )
        leakage[f"{exp}_paired_splits"] = paired

    leakage["valid_clean"] = int(sum(all(v) for v in valid_clean.values()))
    all_flagged = [all(flags) for flags in per_seed_flags.values()]
    checks = {
        "chance": chance,
        "all_valid_flagged_fraction": float(np.mean(all_flagged)) if all_flagged else None,
        "leakage": leakage,
    }
    return ExperimentReport(
        kind="suite",
        config={
            "n_seeds": n_seeds,
            "experiments": list(experiments),
            "phantom": to_dict(phantom),
            "segmentation": to_dict(seg),
            "selection": to_dict(sel),
            "tuning": to_dict(tune),
            "averaging": "segmentation: mean over folds, then mean/sd over seeds",
            "chance_sd": "LOTO: sd over folds; holdout arms: binomial standard error of the test accuracy",
        },
        seeds={"master_seed": master_seed, "children": [r.get("phantom_seed") for r in results]},
        arms=arms,
        deltas=deltas,
        records=ok,
        checks=checks,
        failures=failures,
        wall_time_s=time.perf_counter() - start,
    )


def _chance_entry(stats, flags):
    agg = chance_level_check(stats["mean"], stats["sd"])
    return {**agg.as_dict(), "seeds_flagged": int(sum(flags)), "n_seeds": len(flags)}
