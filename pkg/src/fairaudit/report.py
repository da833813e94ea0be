"""Audit report assembly, JSON persistence, and markdown rendering.

Reports are self-auditing: the per-fold samples, calibration bins, and
contingency counts that produced every printed number are serialized
alongside the verdicts, and the convention choices (disparity sign,
favorable coding, degrees-of-freedom rules) are echoed in the header.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

from .calibration import CalibrationTable
from .metrics import MetricVerdict
from .similarity import ContingencyTable2x2

SCHEMA_VERSION = "1"
TOOL_VERSION = "0.1.0"

_TOP_LEVEL_KEYS = {
    "schema_version",
    "tool_version",
    "timestamp",
    "model_id",
    "config",
    "conventions",
    "model_accuracy",
    "fold_accuracies",
    "verdicts",
    "samples",
    "calibration_bins",
    "contingency_tables",
    "dropped_rows",
    "drop_reasons",
}

CONVENTIONS = {
    "disparity": "unprotected group mean minus protected group mean",
    "favorable_coding": (
        "outcome/prediction 0 is the favorable value; a positive prediction "
        "means predicting the favorable outcome; scores are unfavorable-outcome "
        "probabilities"
    ),
    "undefined_fold_stats": "folds with a zero denominator are dropped, never imputed",
    "calibration_df": "usable bins minus 1",
    "well_calibration_df": "2 x usable bins minus 1",
    "well_calibration_edges": (
        "expected favorable rate per bin is the nearer of (1-upper, 1-lower) "
        "to the observed rate, by absolute difference"
    ),
    "midp": "exact binomial mid-p on min(k, n-k) discordant pairs; no approximation",
    "discordance_direction": (
        "a table counts (original, comparator) predictions; the comparator is the "
        "group-flipped or matched opposite-group prediction, so an excess of "
        "original-unfavorable/comparator-favorable pairs means the opposite group "
        "is advantaged"
    ),
    "p_display": "p-values below 1e-4 render as <1e-4; full precision lives in JSON",
}


@dataclass(frozen=True)
class AuditReport:
    model_id: str
    config: dict
    verdicts: tuple[MetricVerdict, ...]
    samples: dict
    model_accuracy: float | None = None
    fold_accuracies: tuple[float, ...] | None = None
    calibration_table: CalibrationTable | None = None
    causal_tables: dict[str, ContingencyTable2x2] | None = None
    awareness_tables: dict[str, ContingencyTable2x2] | None = None
    dropped_rows: int | None = None
    drop_reasons: dict | None = None
    timestamp: str = ""

    def violations(self) -> list[str]:
        return [v.metric_id for v in self.verdicts if v.verdict == "violation"]


def _verdict_dict(verdict: MetricVerdict) -> dict:
    out = {
        "metric": verdict.metric_id,
        "verdict": verdict.verdict,
        "alpha": verdict.alpha,
        "reason": verdict.reason,
        "components": [],
    }
    for comp in verdict.components:
        test = comp.test
        out["components"].append(
            {
                "label": comp.label,
                "disparity": comp.disparity,
                "statistic": test.statistic,
                "df": test.df,
                "tail": test.tail,
                "p_value": test.p_value,
                "opposite_p": comp.opposite_p,
                "degenerate": test.degenerate,
                "direction": comp.direction,
                "n_protected": comp.n_protected,
                "n_unprotected": comp.n_unprotected,
                "detail": dict(test.extra),
            }
        )
    return out


def _table_dict(table: ContingencyTable2x2) -> dict:
    return {
        "n00": table.n00,
        "n01": table.n01,
        "n10": table.n10,
        "n11": table.n11,
        "original_label": table.original_label,
        "comparator_label": table.comparator_label,
    }


def report_to_dict(report: AuditReport) -> dict:
    """Plain JSON-serializable dict with every convention echoed."""
    calibration_bins = None
    if report.calibration_table is not None:
        calibration_bins = [
            {
                "lower": b.lower,
                "upper": b.upper,
                "protected_total": b.protected_total,
                "protected_favorable": b.protected_favorable,
                "unprotected_total": b.unprotected_total,
                "unprotected_favorable": b.unprotected_favorable,
                "standardized_protected_favorable": b.standardized_protected_favorable,
            }
            for b in report.calibration_table.bins
        ]
    contingency = {}
    for name, tables in (
        ("causal", report.causal_tables),
        ("awareness", report.awareness_tables),
    ):
        contingency[name] = (
            None if tables is None else {g: _table_dict(t) for g, t in tables.items()}
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "tool_version": TOOL_VERSION,
        "timestamp": report.timestamp,
        "model_id": report.model_id,
        "config": report.config,
        "conventions": dict(CONVENTIONS),
        "model_accuracy": report.model_accuracy,
        "fold_accuracies": (
            None
            if report.fold_accuracies is None
            else list(report.fold_accuracies)
        ),
        "verdicts": [_verdict_dict(v) for v in report.verdicts],
        "samples": report.samples,
        "calibration_bins": calibration_bins,
        "contingency_tables": contingency,
        "dropped_rows": report.dropped_rows,
        "drop_reasons": report.drop_reasons,
    }


def write_json(report: AuditReport, path: str | Path) -> None:
    """Serialize with stable key order so identical runs give identical bytes."""
    payload = json.dumps(report_to_dict(report), sort_keys=True, indent=2)
    Path(path).write_text(payload + "\n", encoding="utf-8")


def read_json(path: str | Path) -> dict:
    """Parse a report file; unknown future fields warn instead of failing."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: report must be a JSON object")
    unknown = sorted(set(raw) - _TOP_LEVEL_KEYS)
    if unknown:
        warnings.warn(
            f"{path}: ignoring unknown report fields {unknown} "
            f"(written by a newer tool version?)",
            stacklevel=2,
        )
    return raw


def format_p(p: float | None) -> str:
    if p is None:
        return "-"
    if p < 1e-4:
        return "<1e-4"
    return f"{p:.4f}"


def _fmt(value: float | None, digits: int = 4) -> str:
    if value is None:
        return "-"
    return f"{value:.{digits}f}"


def render_markdown(report: AuditReport) -> str:
    """Human-readable report with one table per metric."""
    d = report_to_dict(report)
    lines = [
        "# Fairness audit report",
        "",
        f"- model: `{d['model_id']}`",
        f"- generated: {d['timestamp']}",
        f"- tool version: {d['tool_version']} (report schema {d['schema_version']})",
        "",
        "## Run configuration",
        "",
    ]
    for key in sorted(d["config"]):
        lines.append(f"- {key}: {d['config'][key]}")
    lines += ["", "## Conventions", ""]
    for key in sorted(d["conventions"]):
        lines.append(f"- {key}: {d['conventions'][key]}")
    lines += ["", "## Model accuracy", ""]
    if d["model_accuracy"] is not None:
        lines.append(f"Mean accuracy across folds: {_fmt(d['model_accuracy'])}")
    else:
        lines.append("Not available.")
    if d["dropped_rows"]:
        lines += ["", f"Dropped input rows: {d['dropped_rows']} ({d['drop_reasons']})"]
    lines += ["", "## Metric verdicts", ""]
    for v in d["verdicts"]:
        lines.append(f"### {v['metric']}")
        lines.append("")
        lines.append(f"Verdict: **{v['verdict']}** (per-test alpha {v['alpha']:g})")
        if v["reason"]:
            lines.append(f"Reason: {v['reason']}")
        if v["components"]:
            lines += [
                "",
                "| Component | Disparity | Test Statistic | P-Value | Opposite-Tail P |",
                "|---|---|---|---|---|",
            ]
            for c in v["components"]:
                stat = c["statistic"]
                stat_text = _fmt(stat) if stat is not None else "-"
                extra = ""
                if c["direction"] is not None:
                    extra = f" ({c['direction']})"
                lines.append(
                    f"| {c['label']}{extra} | {_fmt(c['disparity'])} | {stat_text} "
                    f"| {format_p(c['p_value'])} | {format_p(c['opposite_p'])} |"
                )
        lines.append("")
    if d["calibration_bins"] is not None:
        lines += [
            "## Calibration bins",
            "",
            "| Bin | Protected n | Protected favorable | Unprotected n "
            "| Unprotected favorable | Standardized protected |",
            "|---|---|---|---|---|---|",
        ]
        for b in d["calibration_bins"]:
            std = b["standardized_protected_favorable"]
            lines.append(
                f"| [{b['lower']:.2f}, {b['upper']:.2f}) | {b['protected_total']} "
                f"| {b['protected_favorable']} | {b['unprotected_total']} "
                f"| {b['unprotected_favorable']} | {_fmt(std, 2)} |"
            )
        lines.append("")
    for name, title in (("causal", "Counterfactual"), ("awareness", "Nearest-neighbor")):
        tables = d["contingency_tables"].get(name)
        if not tables:
            continue
        lines += [f"## {title} contingency tables", ""]
        for group in sorted(tables):
            t = tables[group]
            lines += [
                f"{t['original_label']} vs {t['comparator_label']}:",
                "",
                "| original \\ comparator | 0 | 1 |",
                "|---|---|---|",
                f"| 0 | {t['n00']} | {t['n01']} |",
                f"| 1 | {t['n10']} | {t['n11']} |",
                "",
            ]
    return "\n".join(lines) + "\n"


def render_report(report: AuditReport, fmt: str) -> str:
    """Render as ``json`` or ``md`` text."""
    if fmt == "json":
        return json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"
    if fmt == "md":
        return render_markdown(report)
    raise ValueError(f"unknown report format {fmt!r}")


def stamp_timestamp(report: AuditReport) -> AuditReport:
    """Fill the timestamp field with the current UTC time."""
    return replace(
        report,
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
