"""Experiment reports: JSON persistence and table/CSV rendering."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..errors import FormatError

REPORT_FORMAT_VERSION = 1
_TIMING_KEYS = frozenset({"wall_time_s"})


@dataclass
class ExperimentReport:
    """Config echo, per-arm metrics and inflation deltas of one experiment run.

    ``deltas`` are always invalid-arm minus valid-arm values and can be
    recomputed from ``arms``.
    """

    kind: str
    config: dict
    seeds: dict
    arms: dict
    deltas: dict
    records: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    wall_time_s: float = 0.0
    format_version: int = REPORT_FORMAT_VERSION

    def to_dict(self, include_timing: bool = True) -> dict:
        data = asdict(self)
        return data if include_timing else _strip_timing(data)

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(
            _jsonable(self.to_dict(include_timing)), indent=2, sort_keys=True, allow_nan=False
        )

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentReport":
        if data.get("format_version") != REPORT_FORMAT_VERSION:
            raise FormatError(f"unsupported report format_version {data.get('format_version')!r}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise FormatError(f"malformed report ({exc})") from exc

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json(), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "ExperimentReport":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: malformed JSON ({exc})") from exc
        return cls.from_dict(data)


def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k not in _TIMING_KEYS}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


def _jsonable(obj):
    # tuples -> lists, numpy scalars -> python, non-finite floats -> None
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _pct(value):
    return "--" if value is None else f"{100.0 * value:.2f}"


def _pct_sd(stat):
    if stat is None:
        return "--"
    return f"{100.0 * stat['mean']:.2f} ± {100.0 * stat['sd']:.2f}"


def _rows_to_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.9g}"
    return v


CURVE_HEADER = ["segments_per_trial", "scheme", "mean_acc", "sd", "mean_bal_acc"]
TABLE_HEADER = ["arm", "accuracy", "balanced_accuracy"]
SELECTION_ARMS = (("global", "Global"), ("local", "Local"))
TUNING_ARMS = (("wrong", "Wrong"), ("correct", "Correct"))


def _two_by_two(title, arm_names, arms, cell):
    head = "| | " + " | ".join(label for _, label in arm_names) + " |"
    sep = "|---|" + "---|" * len(arm_names)
    lines = [f"### {title}", "", head, sep]
    for metric, label in (("accuracy", "Regular accuracy"), ("balanced_accuracy", "Balanced accuracy")):
        cells = [cell(arms.get(key), metric) for key, _ in arm_names]
        lines.append(f"| {label} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def summarize(report: ExperimentReport):
    """Render ``(markdown, {name: csv_text})`` for a report.

    Every number is read from the report itself.
    """
    kind = report.kind
    csvs = {}
    parts = [f"## {kind} report (format {report.format_version})", ""]

    if kind == "segmentation":
        rows = [
            [r["segments_per_trial"], r["scheme"], _fmt(r["mean_accuracy"]), _fmt(r["sd_accuracy"]),
             _fmt(r["mean_balanced_accuracy"])]
            for r in report.records
        ]
        csvs["curve"] = _rows_to_csv(CURVE_HEADER, rows)
        parts.append(_segmentation_md(rows))
    elif kind in ("selection", "tuning"):
        names = SELECTION_ARMS if kind == "selection" else TUNING_ARMS
        title = "Feature selection" if kind == "selection" else "Hyperparameter tuning"
        parts.append(_two_by_two(title, names, report.arms, lambda a, m: _pct(a and a.get(m))))
        csvs["table"] = _rows_to_csv(
            TABLE_HEADER,
            [[key, _fmt(report.arms[key]["accuracy"]), _fmt(report.arms[key]["balanced_accuracy"])]
             for key, _ in names if key in report.arms],
        )
        parts.append(_deltas_md(report.deltas))
    elif kind == "suite":
        seg = report.arms.get("segmentation", {})
        rows = []
        for scheme, by_n in seg.items():
            for n_key, stats in by_n.items():
                rows.append([int(n_key), scheme, _fmt(stats["accuracy"]["mean"]),
                             _fmt(stats["accuracy"]["sd"]), _fmt(stats["balanced_accuracy"]["mean"])])
        rows.sort(key=lambda r: (r[0], r[1]))
        csvs["curve"] = _rows_to_csv(CURVE_HEADER, rows)
        if rows:
            parts.append(_segmentation_md(rows, "mean over seeds (sd over seeds)"))
        for sub, names, title in (
            ("selection", SELECTION_ARMS, "Feature selection"),
            ("tuning", TUNING_ARMS, "Hyperparameter tuning"),
        ):
            arms = report.arms.get(sub)
            if not arms:
                continue
            parts.append(_two_by_two(title + " (mean ± sd over seeds)", names, arms,
                                     lambda a, m: _pct_sd(a and a.get(m))))
            csvs[sub] = _rows_to_csv(
                ["arm", "mean_acc", "sd_acc", "mean_bal_acc", "sd_bal_acc"],
                [[key, _fmt(arms[key]["accuracy"]["mean"]), _fmt(arms[key]["accuracy"]["sd"]),
                  _fmt(arms[key]["balanced_accuracy"]["mean"]), _fmt(arms[key]["balanced_accuracy"]["sd"])]
                 for key, _ in names if key in arms],
            )
        for sub, deltas in report.deltas.items():
            parts.append(f"#### {sub} deltas")
            parts.append(_deltas_md(deltas))
        parts.append(_chance_md(report.checks))
        if report.failures:
            parts.append(f"{len(report.failures)} seed(s) failed; see report JSON.\n")
    else:
        parts.append(_deltas_md(report.deltas))
    return "\n".join(parts), csvs


def _segmentation_md(rows, note="mean over folds (sd over folds)"):
    lines = [f"### Segmentation: accuracy by segments per trial, {note}", "",
             "| segments/trial | scheme | accuracy | sd | balanced |", "|---|---|---|---|---|"]
    for n, scheme, acc, sd, bal in rows:
        lines.append(f"| {n} | {scheme} | {_pct(float(acc))} | {_pct(float(sd))} | {_pct(float(bal))} |")
    return "\n".join(lines) + "\n"


def _deltas_md(deltas):
    if not deltas:
        return ""
    lines = ["| inflation (invalid - valid) | points |", "|---|---|"]
    for key, value in deltas.items():
        if isinstance(value, dict):
            value = value.get("mean")
        lines.append(f"| {key} | {_pct(value)} |")
    return "\n".join(lines) + "\n"


def _chance_md(checks):
    chance = checks.get("chance", {})
    if not chance:
        return ""
    lines = ["### Chance-level check (valid arms)", "",
             "| arm | mean ± sd | flagged (aggregate) | seeds flagged |", "|---|---|---|---|"]
    for arm, c in chance.items():
        lines.append(
            f"| {arm} | {_pct(c['accuracy'])} ± {_pct(c['sd'])} | {'yes' if c['flagged'] else 'no'} | "
            f"{c['seeds_flagged']}/{c['n_seeds']} |"
        )
    frac = checks.get("all_valid_flagged_fraction")
    if frac is not None:
        lines.append(f"\nSeeds with every valid arm at chance: {_pct(frac)}%")
    return "\n".join(lines) + "\n"


def write_report_files(report: ExperimentReport, out_dir, stem: str):
    """Write ``<stem>.report.json``, ``<stem>.table.md`` and ``<stem>.<name>.csv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    markdown, csvs = summarize(report)
    written = [report.save(out_dir / f"{stem}.report.json")]
    md_path = out_dir / f"{stem}.table.md"
    md_path.write_text(markdown, encoding="utf-8")
    written.append(md_path)
    for name, text in csvs.items():
        p = out_dir / f"{stem}.{name}.csv"
        p.write_text(text, encoding="utf-8")
        written.append(p)
    return markdown, written
