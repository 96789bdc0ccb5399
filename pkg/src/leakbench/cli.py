"""Command-line front end.

Commands: ``generate`` (phantom trial set), ``run`` (one experiment or the
suite), ``audit`` (group-leakage check of an external split plan) and
``report`` (re-render tables from a report JSON).

Exit codes: 0 ok, 2 usage/config, 3 I/O, 4 data, 5 internal, 10 leaky audit.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .errors import ConfigError, DataError, InvariantError, PreconditionError
from .evaluation import read_plan_csv, verify_no_group_leakage
from .experiments import (
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
    to_dict,
    write_report_files,
)
from .trialdata import PhantomConfig, binarize_labels, generate_phantom, load_trialset, save_trialset

log = logging.getLogger("leakbench")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DATA, EXIT_INTERNAL, EXIT_LEAKY = 0, 2, 3, 4, 5, 10

EXP_KINDS = {"seg": "segmentation", "select": "selection", "tune": "tuning", "suite": "suite"}
RUN_DEFAULTS = {
    "exp": None,
    "data": None,
    "phantom": False,
    "axis": None,
    "threshold": 5.0,
    "seeds": None,
    "seed": 0,
}
# flag dest -> PhantomConfig field
PHANTOM_FLAGS = {
    "trials": "n_trials",
    "seconds": "trial_seconds",
    "fs": "sampling_rate_hz",
    "channels": "n_channels",
    "ar": "ar_coefficient",
    "noise_sd": "noise_sd",
    "offset_sd": "trial_offset_sd",
    "gain_sd": "channel_gain_sd",
    "trial_gain_sd": "trial_gain_sd",
    "balanced": "balanced",
}


class UsageError(Exception):
    pass


def _common(parser):
    parser.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("--config", type=Path, default=None, help="JSON config or a previous run manifest")
    parser.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    parser.add_argument("--quiet", action="store_true", help="suppress table output")


def _phantom_flags(parser):
    g = parser.add_argument_group("phantom generator")
    g.add_argument("--trials", type=int)
    g.add_argument("--seconds", type=float)
    g.add_argument("--fs", type=float)
    g.add_argument("--channels", type=int)
    g.add_argument("--ar", type=float, help="AR(1) coefficient")
    g.add_argument("--noise-sd", type=float)
    g.add_argument("--offset-sd", type=float, help="per-trial DC offset sd")
    g.add_argument("--gain-sd", type=float, help="fixed per-channel gain sd")
    g.add_argument("--trial-gain-sd", type=float, help="per-trial log-amplitude sd")
    g.add_argument("--balanced", dest="balanced", action="store_true", default=None)
    g.add_argument("--unbalanced", dest="balanced", action="store_false")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="leakbench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"leakbench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a phantom trial set")
    _common(gen)
    _phantom_flags(gen)

    run = sub.add_parser("run", help="run an experiment")
    _common(run)
    _phantom_flags(run)
    run.add_argument("--exp", choices=sorted(EXP_KINDS))
    src = run.add_mutually_exclusive_group()
    src.add_argument("--data", type=Path, help="trial-set directory")
    src.add_argument("--phantom", action="store_true", default=None, help="use generated phantom data")
    run.add_argument("--mode", help="restrict to one arm (global/local, wrong/correct)")
    run.add_argument("--policy", choices=["test_max", "nested"], help="global feature-count policy")
    run.add_argument("--axis", choices=["valence", "arousal", "dominance", "liking"])
    run.add_argument("--threshold", type=float)
    run.add_argument("--seeds", type=int, help="number of phantom seeds (suite default 20)")
    run.add_argument("--segments", help="comma-separated segment lengths in seconds")
    run.add_argument("--k", type=int, help="kNN neighbours for the segmentation/selection experiments")
    run.add_argument("--bands", choices=["FOUR", "FIVE"])

    audit = sub.add_parser("audit", help="check a split plan for group leakage")
    audit.add_argument("--plan", type=Path, required=True, help="CSV: row_id,fold_id,side")
    audit.add_argument("--groups", type=Path, required=True, help="CSV: row_id,group_id")
    audit.add_argument("--quiet", action="store_true")

    rep = sub.add_parser("report", help="re-render tables from a report JSON")
    rep.add_argument("report", type=Path)
    rep.add_argument("--out", type=Path, default=None)
    rep.add_argument("--quiet", action="store_true")
    return parser


def _load_config(path):
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"malformed JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError("--config", "expected a JSON object")
    return data.get("resolved_config", data)


def _resolve_phantom(args, cfg):
    phantom = from_dict(PhantomConfig, cfg.get("phantom"))
    overrides = {field: getattr(args, dest) for dest, field in PHANTOM_FLAGS.items()
                 if getattr(args, dest, None) is not None}
    try:
        return replace(phantom, **overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError("phantom", str(exc)) from exc


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write_manifest(path, manifest):
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str), encoding="utf-8")


def cmd_generate(args) -> int:
    cfg = _load_config(args.config)
    phantom = _resolve_phantom(args, cfg)
    seed = args.seed if args.seed is not None else phantom.master_seed
    phantom = replace(phantom, master_seed=seed).validate()
    out = args.out or Path("phantom")
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": "generate",
        "argv": sys.argv[1:],
        "tool_version": __version__,
        "master_seed": seed,
        "resolved_config": {"phantom": to_dict(phantom)},
        "outputs": [str(out)],
        "started_at": _now(),
    }
    _write_manifest(out / "manifest.json", manifest)
    save_trialset(generate_phantom(phantom), out)
    manifest["finished_at"] = _now()
    _write_manifest(out / "manifest.json", manifest)
    if not args.quiet:
        print(f"wrote {phantom.n_trials} trials x {phantom.n_channels} channels to {out}")
    return EXIT_OK


def _resolve_run(args):
    cfg = _load_config(args.config)
    run = {**RUN_DEFAULTS, **cfg.get("run", {})}
    for key in ("exp", "axis", "threshold", "seeds", "seed"):
        if getattr(args, key) is not None:
            run[key] = getattr(args, key)
    if args.data is not None:
        run["data"], run["phantom"] = str(args.data), False
    elif args.phantom:
        run["data"], run["phantom"] = None, True
    if run["exp"] not in EXP_KINDS:
        raise UsageError("--exp is required (seg, select, tune or suite)")
    if not run["phantom"] and run["data"] is None:
        raise UsageError("one of --data or --phantom is required")
    if run["phantom"] and run["axis"] is not None:
        raise UsageError("phantom data is pre-labelled; --axis is not accepted")
    if run["exp"] == "suite" and not run["phantom"]:
        raise UsageError("the suite runs on phantom data only; pass --phantom")
    if run["seeds"] is None:
        run["seeds"] = 20 if run["exp"] == "suite" else 1
    if run["seeds"] < 1:
        raise UsageError("--seeds must be >= 1")
    if run["seeds"] > 1 and not run["phantom"]:
        raise UsageError("--seeds > 1 needs --phantom (one split seed per data set)")

    seg = from_dict(SegExpConfig, cfg.get("segmentation"))
    sel = from_dict(SelExpConfig, cfg.get("selection"))
    tune = from_dict(TuneExpConfig, cfg.get("tuning"))
    try:
        if args.segments:
            seg = replace(seg, segment_seconds=tuple(float(x) for x in args.segments.split(",")))
        if args.k is not None:
            seg = replace(seg, knn=replace(seg.knn, k=args.k))
            sel = replace(sel, knn=replace(sel.knn, k=args.k))
        if args.bands:
            seg, sel, tune = (replace(c, bands=args.bands) for c in (seg, sel, tune))
        if args.policy:
            sel = replace(sel, global_count_policy=args.policy)
        if args.mode:
            if run["exp"] == "select":
                sel = replace(sel, modes=(args.mode,))
            elif run["exp"] == "tune":
                tune = replace(tune, modes=(args.mode,))
            else:
                raise UsageError("--mode applies to --exp select or tune")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    phantom = _resolve_phantom(args, cfg)
    return run, phantom, seg, sel, tune


def cmd_run(args) -> int:
    run, phantom, seg, sel, tune = _resolve_run(args)
    kind = EXP_KINDS[run["exp"]]
    seed = int(run["seed"])
    out = args.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{kind}_{seed}"
    manifest = {
        "command": "run",
        "argv": sys.argv[1:],
        "tool_version": __version__,
        "master_seed": seed,
        "resolved_config": {
            "run": run,
            "phantom": to_dict(phantom),
            "segmentation": to_dict(seg),
            "selection": to_dict(sel),
            "tuning": to_dict(tune),
        },
        "inputs": {"data": run["data"]},
        "outputs": [],
        "started_at": _now(),
    }
    manifest_path = out / f"{stem}.manifest.json"
    _write_manifest(manifest_path, manifest)

    jobs = args.jobs or os.cpu_count() or 1
    runners = {"segmentation": (run_segmentation_experiment, seg),
               "selection": (run_selection_experiment, sel),
               "tuning": (run_tuning_experiment, tune)}
    if kind == "suite" or run["seeds"] > 1:
        experiments = tuple(runners) if kind == "suite" else (kind,)
        report = run_inflation_suite(run["seeds"], seed, phantom, seg, sel, tune, experiments, jobs)
        if len(report.failures) == run["seeds"]:
            raise InvariantError(f"every seed failed: {report.failures[0]['error']}")
    else:
        if run["phantom"]:
            phantom.validate()
            ts = generate_phantom(replace(phantom, master_seed=derive_seed(seed, "phantom", 0)))
        else:
            ts = load_trialset(run["data"])
            if run["axis"] is not None:
                ts = binarize_labels(ts, run["axis"], float(run["threshold"]))
        fn, cfg = runners[kind]
        report = fn(ts, cfg, derive_seed(seed, kind, 0))

    markdown, written = write_report_files(report, out, stem)
    manifest["outputs"] = [str(p) for p in written]
    manifest["finished_at"] = _now()
    _write_manifest(manifest_path, manifest)
    if not args.quiet:
        print(markdown)
    return EXIT_OK


def cmd_audit(args) -> int:
    plan, groups = read_plan_csv(
        args.plan.read_text(encoding="utf-8"), args.groups.read_text(encoding="utf-8")
    )
    report = verify_no_group_leakage(plan, groups)
    if not args.quiet:
        print(report.summary())
    return EXIT_LEAKY if report.leaky else EXIT_OK


def cmd_report(args) -> int:
    report = ExperimentReport.load(args.report)
    stem = args.report.name.removesuffix(".report.json")
    out = args.out or args.report.parent
    markdown, _ = write_report_files(report, out, stem)
    if not args.quiet:
        print(markdown)
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "run": cmd_run, "audit": cmd_audit, "report": cmd_report}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)  # argparse exits with 2 on bad flags
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, PreconditionError) as exc:
        print(f"leakbench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"leakbench: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"leakbench: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InvariantError as exc:
        print(f"leakbench: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # anything unexpected is an internal failure
        log.exception("unexpected failure")
        print(f"leakbench: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
