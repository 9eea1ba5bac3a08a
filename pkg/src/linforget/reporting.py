"""Delimited and JSON output writers with fixed, documented schemas.

Floats are written with 17 significant digits so downstream recomputation is
exact; booleans are 0/1; undefined values (for example the forgetting ratio
when the first task was not learned) are empty cells.  Trial wall time is
deliberately not part of records.csv so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict

from .experiments import METRICS, PointAggregate, TrialRecord

RECORD_COLUMNS = (
    "point_index", "trial_index", "variant", "d", "n", "p", "gamma", "theta_sq",
    "w_mode", "failed",
    "r_a", "r_ba", "r_b_on_b", "r_null", "sigma2", "forgetting", "ratio",
    "ratio_defined", "proj_energy", "dual_gap",
    "emp_r_a", "emp_r_a_se", "emp_r_ba", "emp_r_ba_se",
    "emp_r_b_on_b", "emp_r_b_on_b_se",
    "mc_ok_a", "mc_ok_ba", "mc_ok_b",
    "premise_ok", "forgetting_premise_ok",
    "b_single", "b_terminal", "b_forgetting", "b_ratio", "b_proj",
    "ok_single", "ok_terminal", "ok_forgetting", "ok_ratio", "ok_proj",
)

AGGREGATE_COLUMNS = (
    "point_index", "variant", "d", "n", "p", "gamma", "theta_sq", "w_mode",
    "trials", "failed_count", "failure_flagged", "ratio_undefined_count",
    "premise_ok",
    *(f"{stat}_{metric}" for metric in METRICS for stat in ("mean", "median", "q10", "q90")),
    "freq_ok_single", "freq_ok_terminal", "freq_ok_forgetting", "freq_ok_ratio",
    "freq_ok_proj", "freq_mc_ok",
    "b_single", "b_terminal", "b_forgetting", "b_ratio", "b_proj",
)


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _record_row(rec: TrialRecord) -> list[str]:
    data = asdict(rec)
    data["ratio_defined"] = rec.ratio is not None
    return [format_cell(data[col]) for col in RECORD_COLUMNS]


def write_records_csv(records: list[TrialRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_COLUMNS)
        for rec in records:
            writer.writerow(_record_row(rec))


def _aggregate_row(agg: PointAggregate) -> list[str]:
    data = asdict(agg)
    for metric in METRICS:
        for stat in ("mean", "median", "q10", "q90"):
            data[f"{stat}_{metric}"] = agg.stats[metric][stat]
    return [format_cell(data[col]) for col in AGGREGATE_COLUMNS]


def write_aggregates_csv(aggregates: list[PointAggregate], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AGGREGATE_COLUMNS)
        for agg in aggregates:
            writer.writerow(_aggregate_row(agg))


def write_summary_json(checks: list[dict], path) -> None:
    """Machine-readable pass/fail summary; check names are stable identifiers."""
    payload = {
        "all_passed": all(c["passed"] for c in checks if c.get("passed") is not None),
        "checks": checks,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=False)
        fh.write("\n")
