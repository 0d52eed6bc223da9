"""Cutoff-rule treatment assignment and analysis-dataset assembly.

The instrument is the inclusive cutoff indicator 1[W <= c].  Manual
overrides make the design fuzzy; every override carries a free-text
reason so the fuzziness stays auditable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .cohort import StudentFeatures
from .errors import InputError

# Probabilities are rounded on ingestion so cutoff ties behave the same
# on every platform.
W_DECIMALS = 12

ANALYSIS_COLUMNS = ["student_id", "W", "Z", "T", "Y", "X", "attended"]


@dataclass(frozen=True)
class Override:
    student_id: str
    forced_treatment: int
    reason: str


@dataclass
class AssignmentConfig:
    cutoff: float = 0.4
    severe_cutoff: float | None = None  # metadata only; never enters estimation
    overrides: dict[str, Override] = field(default_factory=dict)

    def validate(self) -> None:
        if not 0.0 < self.cutoff < 1.0:
            raise InputError(f"cutoff {self.cutoff} outside (0, 1)")
        if self.severe_cutoff is not None and not 0.0 < self.severe_cutoff < self.cutoff:
            raise InputError(
                f"severe_cutoff {self.severe_cutoff} must lie in (0, cutoff={self.cutoff})"
            )
        for override in self.overrides.values():
            if override.forced_treatment not in (0, 1):
                raise InputError(
                    f"override for {override.student_id}: forced_treatment must be 0 or 1"
                )
            if not override.reason.strip():
                raise InputError(f"override for {override.student_id} has no reason")


@dataclass(frozen=True)
class Assignment:
    student_id: str
    w: float
    z: int
    t: int
    severity: str  # "none", "standard" or "strict"
    override_reason: str | None = None


@dataclass(frozen=True)
class AnalysisRow:
    """One student in the discontinuity dataset."""

    student_id: str
    w: float  # running variable: predicted pass probability
    z: int  # instrument 1[w <= cutoff]
    t: int  # actual treatment after overrides
    y: float  # latest final-exam points
    x: tuple[float, ...] = ()  # covariates (online-test point sum)
    attended: bool = True


def assign(probabilities: Mapping[str, float], config: AssignmentConfig) -> list[Assignment]:
    """Apply the cutoff rule, then overrides; sorted by student id."""
    config.validate()
    unknown = sorted(set(config.overrides) - set(probabilities))
    if unknown:
        raise InputError(f"override(s) for unknown student(s): {', '.join(unknown)}")
    assignments = []
    for student_id in sorted(probabilities):
        w = round(float(probabilities[student_id]), W_DECIMALS)
        if not 0.0 < w < 1.0:
            raise InputError(f"student {student_id}: probability {w} outside (0, 1)")
        z = 1 if w <= config.cutoff else 0
        override = config.overrides.get(student_id)
        t = override.forced_treatment if override else z
        if config.severe_cutoff is not None and w <= config.severe_cutoff:
            severity = "strict"
        elif z:
            severity = "standard"
        else:
            severity = "none"
        assignments.append(
            Assignment(student_id, w, z, t, severity, override.reason if override else None)
        )
    return assignments


def override_fraction(assignments: Sequence[Assignment]) -> float:
    if not assignments:
        return 0.0
    return sum(1 for a in assignments if a.t != a.z) / len(assignments)


def build_analysis_dataset(
    features: Sequence[StudentFeatures],
    assignments: Sequence[Assignment],
) -> tuple[list[AnalysisRow], list[str]]:
    """One row per attending student, plus the list of excluded students.

    Y is the latest exam attempt's points; X is the online-test point sum.
    """
    by_student: dict[str, Assignment] = {}
    for assignment in assignments:
        if assignment.student_id in by_student:
            raise InputError(f"duplicate assignment for student {assignment.student_id}")
        by_student[assignment.student_id] = assignment
    seen: set[str] = set()
    rows: list[AnalysisRow] = []
    excluded: list[str] = []
    for student in sorted(features, key=lambda s: s.student_id):
        if student.student_id in seen:
            raise InputError(f"duplicate student {student.student_id} in features")
        seen.add(student.student_id)
        if student.student_id not in by_student:
            raise InputError(f"no assignment for student {student.student_id}")
        if not student.attended:
            excluded.append(student.student_id)
            continue
        assignment = by_student[student.student_id]
        rows.append(
            AnalysisRow(
                student_id=student.student_id,
                w=assignment.w,
                z=assignment.z,
                t=assignment.t,
                y=float(student.exam_points),
                x=(float(student.testate_points),),
                attended=True,
            )
        )
    return rows, excluded


# --- CSV interfaces -------------------------------------------------------


def read_overrides_csv(source) -> dict[str, Override]:
    overrides: dict[str, Override] = {}
    if hasattr(source, "read"):
        handle = source
        close = False
    else:
        handle = open(source, newline="", encoding="utf-8")
        close = True
    try:
        reader = csv.DictReader(handle)
        for row in reader:
            for column in ("student_id", "forced_treatment", "reason"):
                if column not in row or row[column] is None:
                    raise InputError(f"overrides, line {reader.line_num}: missing {column}")
            raw = row["forced_treatment"].strip()
            if raw not in ("0", "1"):
                raise InputError(
                    f"overrides, line {reader.line_num}: forced_treatment {raw!r} not in {{0, 1}}"
                )
            student_id = row["student_id"].strip()
            if student_id in overrides:
                raise InputError(f"overrides, line {reader.line_num}: duplicate {student_id}")
            reason = row["reason"].strip()
            if not reason:
                raise InputError(f"overrides, line {reader.line_num}: empty reason")
            overrides[student_id] = Override(student_id, int(raw), reason)
    finally:
        if close:
            handle.close()
    return overrides


def write_analysis_csv(rows: Sequence[AnalysisRow], path) -> None:
    """Full-precision, deterministic analysis.csv (sorted by student id)."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(ANALYSIS_COLUMNS)
        for row in sorted(rows, key=lambda r: r.student_id):
            writer.writerow(
                [
                    row.student_id,
                    repr(row.w),
                    row.z,
                    row.t,
                    repr(row.y),
                    ";".join(repr(v) for v in row.x),
                    int(row.attended),
                ]
            )


def read_analysis_csv(source) -> list[AnalysisRow]:
    rows: list[AnalysisRow] = []
    if hasattr(source, "read"):
        handle = source
        close = False
    else:
        handle = open(source, newline="", encoding="utf-8")
        close = True
    try:
        reader = csv.DictReader(handle)
        for row in reader:
            for column in ANALYSIS_COLUMNS:
                if column not in row or row[column] is None:
                    raise InputError(f"analysis, line {reader.line_num}: missing {column}")
            try:
                w = float(row["W"])
                y = float(row["Y"])
            except ValueError:
                raise InputError(f"analysis, line {reader.line_num}: non-numeric W or Y") from None
            if not 0.0 < w < 1.0:
                raise InputError(f"analysis, line {reader.line_num}: W {w} outside (0, 1)")
            if row["Z"].strip() not in ("0", "1") or row["T"].strip() not in ("0", "1"):
                raise InputError(f"analysis, line {reader.line_num}: Z and T must be 0/1")
            x_raw = row["X"].strip()
            x = tuple(float(v) for v in x_raw.split(";")) if x_raw else ()
            rows.append(
                AnalysisRow(
                    student_id=row["student_id"].strip(),
                    w=w,
                    z=int(row["Z"]),
                    t=int(row["T"]),
                    y=y,
                    x=x,
                    attended=row["attended"].strip() not in ("0", "false", "False"),
                )
            )
    finally:
        if close:
            handle.close()
    return rows


def write_roster_csv(assignments: Sequence[Assignment], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["student_id", "W", "Z", "T", "severity", "reason"])
        for a in assignments:
            writer.writerow([a.student_id, repr(a.w), a.z, a.t, a.severity, a.override_reason or ""])


def read_roster_csv(source) -> list[Assignment]:
    assignments: list[Assignment] = []
    if hasattr(source, "read"):
        handle = source
        close = False
    else:
        handle = open(source, newline="", encoding="utf-8")
        close = True
    try:
        reader = csv.DictReader(handle)
        for row in reader:
            for column in ("student_id", "W", "Z", "T", "severity"):
                if column not in row or row[column] is None:
                    raise InputError(f"roster, line {reader.line_num}: missing {column}")
            assignments.append(
                Assignment(
                    student_id=row["student_id"].strip(),
                    w=float(row["W"]),
                    z=int(row["Z"]),
                    t=int(row["T"]),
                    severity=row["severity"].strip(),
                    override_reason=(row.get("reason") or "").strip() or None,
                )
            )
    finally:
        if close:
            handle.close()
    return assignments
