"""Deterministic plain-text report rendering.

Estimates are shown with 3 significant figures; the full-precision
values live in the CSV outputs.  Nothing here depends on wall-clock
time, so identical inputs render byte-identical reports.
"""

from __future__ import annotations

import math

import numpy as np

from .bandwidth import BandwidthDiagnostics
from .cohort import AttendanceCrosstab, GradeDistribution
from .mccrary import McCraryResult
from .rdd import RddFit


def sig3(value: float) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.3g}"


def full(value: float) -> str:
    """Shortest round-trip decimal (also used for bandwidths: 0.255 -> 0.1275, 0.51)."""
    return repr(float(value))


def _table(headers: list[str], rows: list[list[str]], label_width: int = 12) -> str:
    widths = [label_width] + [
        max(len(headers[i]), max((len(row[i + 1]) for row in rows), default=0))
        for i in range(len(headers))
    ]
    lines = [
        "".ljust(widths[0])
        + "  "
        + "  ".join(headers[i].ljust(widths[i + 1]) for i in range(len(headers)))
    ]
    for row in rows:
        lines.append(
            row[0].ljust(widths[0])
            + "  "
            + "  ".join(row[i + 1].ljust(widths[i + 1]) for i in range(len(headers)))
        )
    return "\n".join(lines)


def format_rdd_section(title: str, fits: list[RddFit]) -> str:
    headers = ["bandwidth", "Observations", "Estimate", "Std. Error", "z-value", "p-value"]
    rows = [
        [
            fit.label,
            full(fit.bandwidth),
            str(fit.n_window),
            sig3(fit.estimate),
            sig3(fit.std_error),
            sig3(fit.z_value),
            sig3(fit.p_value),
        ]
        for fit in fits
    ]
    lines = [title, "-" * len(title), _table(headers, rows), "", "F-statistics"]
    f_rows = [
        [
            fit.label,
            sig3(fit.f_test.statistic),
            str(fit.f_test.df_num),
            str(fit.f_test.df_den),
            sig3(fit.f_test.p_value),
        ]
        for fit in fits
    ]
    lines.append(_table(["F", "Num. DoF", "Denom. DoF", "p-value"], f_rows))
    warnings = [
        f"note: weak first stage for {fit.label} (first-stage F = {sig3(fit.first_stage_f)})"
        for fit in fits
        if fit.weak_instrument and fit.first_stage_f is not None
    ]
    if warnings:
        lines.append("")
        lines.extend(warnings)
    return "\n".join(lines)


def format_mccrary_section(result: McCraryResult) -> str:
    lines = [
        "Density discontinuity (sorting) test",
        "------------------------------------",
        f"log density difference theta = {sig3(result.theta)}",
        f"std. error = {sig3(result.std_error)}",
        f"z = {sig3(result.z)}, p-value = {sig3(result.p_value)}",
        f"bin width = {sig3(result.bin_width)}, bandwidth = {sig3(result.bandwidth)}",
        f"boundary densities: left = {sig3(result.f_left)}, right = {sig3(result.f_right)}",
        f"observations: {result.n_left} left, {result.n_right} right of the cutoff",
    ]
    return "\n".join(lines)


def format_bandwidth_section(diag: BandwidthDiagnostics) -> str:
    m2_left, m2_right = diag.second_derivatives
    r_left, r_right = diag.regularization
    lines = [
        "Bandwidth selection",
        "-------------------",
        f"selected bandwidth = {full(diag.h_opt)}",
        f"pilot bandwidth = {sig3(diag.pilot_bandwidth)}",
        f"density at cutoff = {sig3(diag.f_hat_c)}",
        f"outcome variance at cutoff = {sig3(diag.sigma2_c)}",
        f"second derivatives: left = {sig3(m2_left)}, right = {sig3(m2_right)}",
        f"regularization: left = {sig3(r_left)}, right = {sig3(r_right)}",
        f"observations: {diag.n_left} left, {diag.n_right} right of the cutoff",
    ]
    return "\n".join(lines)


def summary_stats(values) -> dict[str, float]:
    """min, quartiles (linear interpolation between order statistics), mean, max, sd."""
    data = np.asarray(list(values), dtype=float)
    if data.size == 0:
        return {key: math.nan for key in ("count", "min", "q25", "median", "mean", "q75", "max", "sd")} | {
            "count": 0
        }
    return {
        "count": int(data.size),
        "min": float(data.min()),
        "q25": float(np.quantile(data, 0.25)),
        "median": float(np.quantile(data, 0.5)),
        "mean": float(data.mean()),
        "q75": float(np.quantile(data, 0.75)),
        "max": float(data.max()),
        "sd": float(np.std(data, ddof=1)) if data.size > 1 else 0.0,
    }


def format_group_summaries(variable: str, groups: dict[str, dict[str, float]]) -> str:
    headers = ["count", "min", "Q0.25", "median", "mean", "Q0.75", "max", "sd"]
    rows = []
    for label in sorted(groups):
        stats = groups[label]
        rows.append(
            [
                f"{variable} [{label}]",
                str(stats["count"]),
                sig3(stats["min"]),
                sig3(stats["q25"]),
                sig3(stats["median"]),
                sig3(stats["mean"]),
                sig3(stats["q75"]),
                sig3(stats["max"]),
                sig3(stats["sd"]),
            ]
        )
    return _table(headers, rows, label_width=24)


def format_grade_distribution(dist: GradeDistribution) -> str:
    lines = ["Grade distribution (attendees)", "------------------------------"]
    for grade in range(1, 6):
        lines.append(f"grade {grade}: {dist.counts[grade]}")
    lines.append(f"attendees: {dist.n_attendees}")
    if dist.failure_rate is None:
        lines.append("failure rate: undefined (no attendees)")
    else:
        lines.append(f"failure rate: {sig3(dist.failure_rate)}")
    return "\n".join(lines)


def format_crosstab(tab: AttendanceCrosstab) -> str:
    lines = [
        "Warnings vs exam attendance",
        "---------------------------",
        "                attended=1  attended=0",
        f"warning=1       {tab.cells[(1, 1)]:<10}  {tab.cells[(1, 0)]:<10}",
        f"warning=0       {tab.cells[(0, 1)]:<10}  {tab.cells[(0, 0)]:<10}",
        f"total: {tab.total()}",
    ]
    return "\n".join(lines)


def render_report(sections: list[str]) -> str:
    return "\n\n".join(section for section in sections if section) + "\n"
