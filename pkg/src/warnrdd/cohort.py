"""Course-log ingestion and per-student feature construction.

Raw inputs are three CSV files: homework submissions, online tests and
exam results.  Everything here is a pure function over immutable record
lists, and all tabular outputs are sorted by student id so reruns are
byte-identical.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime, time
from typing import Iterable, Mapping, Sequence

from .errors import InputError

TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M"

# Grade boundaries on best exam points (out of 60) for grades 1, 2 and 3;
# a passing exam below all three maps to grade 4.  The original course did
# not publish its numeric scale, so these are configurable defaults.
DEFAULT_GRADE_BOUNDS = (52.5, 45.0, 37.5)

N_ONLINE_TESTS = 5


@dataclass(frozen=True)
class SubmissionRecord:
    """One homework submission (points on a 0-100 scale, minute-precision stamp)."""

    student_id: str
    exercise_id: str
    points: float
    timestamp: datetime


@dataclass(frozen=True)
class OnlineTestRecord:
    student_id: str
    test_index: int
    points: float


@dataclass(frozen=True)
class ExamRecord:
    student_id: str
    attempt: int
    points: float
    passed: bool


@dataclass
class StudentFeatures:
    """Per-student aggregates feeding the prediction and analysis stages."""

    student_id: str
    submissions_total: int
    testate_points: float
    test_points: dict[int, float]
    score_at: dict[date, float] = field(default_factory=dict)
    submissions_in_period: dict[tuple[date, date], int] = field(default_factory=dict)
    begun_exercises_at: dict[date, int] = field(default_factory=dict)
    grade: int = 6
    attended: bool = False
    passed: bool = False
    exam_points: float | None = None


def _rows(source):
    """Yield (line_number, row_dict) from a path or open text stream."""
    if hasattr(source, "read"):
        reader = csv.DictReader(source)
        for row in reader:
            yield reader.line_num, row
    else:
        with open(source, newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            for row in reader:
                yield reader.line_num, row


def _require_columns(row, required, what):
    missing = [name for name in required if name not in row or row[name] is None]
    if missing:
        raise InputError(f"{what}: missing column(s) {', '.join(missing)}")


def _parse_float(value, line_num, column, lo, hi, what):
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise InputError(f"{what}, line {line_num}: {column} {value!r} is not a number") from None
    if not lo <= number <= hi:
        raise InputError(f"{what}, line {line_num}: {column} {number} outside [{lo}, {hi}]")
    return number


def ingest_submissions(source) -> list[SubmissionRecord]:
    """Parse submissions.csv; row order is preserved (it breaks timestamp ties)."""
    records = []
    for line_num, row in _rows(source):
        _require_columns(row, ("student_id", "exercise_id", "points", "timestamp"), "submissions")
        points = _parse_float(row["points"], line_num, "points", 0.0, 100.0, "submissions")
        try:
            stamp = datetime.strptime(row["timestamp"].strip(), TIMESTAMP_FORMAT)
        except ValueError:
            raise InputError(
                f"submissions, line {line_num}: timestamp {row['timestamp']!r} "
                f"is not {TIMESTAMP_FORMAT} (minute precision)"
            ) from None
        records.append(
            SubmissionRecord(row["student_id"].strip(), row["exercise_id"].strip(), points, stamp)
        )
    return records


def ingest_online_tests(source) -> list[OnlineTestRecord]:
    records = []
    seen = set()
    for line_num, row in _rows(source):
        _require_columns(row, ("student_id", "test_index", "points"), "tests")
        try:
            index = int(row["test_index"])
        except (TypeError, ValueError):
            raise InputError(f"tests, line {line_num}: bad test_index {row['test_index']!r}") from None
        if not 1 <= index <= N_ONLINE_TESTS:
            raise InputError(f"tests, line {line_num}: test_index {index} outside 1..{N_ONLINE_TESTS}")
        points = _parse_float(row["points"], line_num, "points", 0.0, 400.0, "tests")
        key = (row["student_id"].strip(), index)
        if key in seen:
            raise InputError(f"tests, line {line_num}: duplicate record for student {key[0]}, test {index}")
        seen.add(key)
        records.append(OnlineTestRecord(key[0], index, points))
    return records


def ingest_exams(source) -> list[ExamRecord]:
    records = []
    seen = set()
    for line_num, row in _rows(source):
        _require_columns(row, ("student_id", "attempt", "points", "passed"), "exams")
        try:
            attempt = int(row["attempt"])
        except (TypeError, ValueError):
            raise InputError(f"exams, line {line_num}: bad attempt {row['attempt']!r}") from None
        if attempt not in (1, 2):
            raise InputError(f"exams, line {line_num}: attempt {attempt} not in {{1, 2}}")
        points = _parse_float(row["points"], line_num, "points", 0.0, 60.0, "exams")
        passed_raw = row["passed"].strip()
        if passed_raw not in ("0", "1"):
            raise InputError(f"exams, line {line_num}: passed {passed_raw!r} not in {{0, 1}}")
        key = (row["student_id"].strip(), attempt)
        if key in seen:
            raise InputError(f"exams, line {line_num}: duplicate attempt {attempt} for student {key[0]}")
        seen.add(key)
        records.append(ExamRecord(key[0], attempt, points, passed_raw == "1"))
    return records


def _end_of_day(day: date) -> datetime:
    return datetime.combine(day, time.max)


def compute_score(records: Sequence[SubmissionRecord], student_id: str, t: date) -> float:
    """Sum over exercises of the latest submission's points up to end of day t.

    Ties at identical timestamps are broken by record order (last wins),
    matching an append-only log.  A later submission may score lower than
    an earlier one; the latest still wins.
    """
    cutoff = _end_of_day(t)
    latest: dict[str, float] = {}
    latest_stamp: dict[str, datetime] = {}
    for record in records:
        if record.student_id != student_id or record.timestamp > cutoff:
            continue
        prev = latest_stamp.get(record.exercise_id)
        if prev is None or record.timestamp >= prev:
            latest_stamp[record.exercise_id] = record.timestamp
            latest[record.exercise_id] = record.points
    return float(sum(latest.values()))


def count_submissions(
    records: Sequence[SubmissionRecord], student_id: str, period: tuple[date, date]
) -> int:
    """Number of the student's submissions inside the closed day period."""
    start, end = period
    if start > end:
        raise InputError(f"inverted period: {start} > {end}")
    lo = datetime.combine(start, time.min)
    hi = _end_of_day(end)
    return sum(
        1
        for record in records
        if record.student_id == student_id and lo <= record.timestamp <= hi
    )


def begun_exercises(records: Sequence[SubmissionRecord], student_id: str, t: date) -> int:
    """Distinct exercises with at least one submission up to end of day t."""
    cutoff = _end_of_day(t)
    return len(
        {
            record.exercise_id
            for record in records
            if record.student_id == student_id and record.timestamp <= cutoff
        }
    )


@dataclass
class GradeDistribution:
    counts: dict[int, int]  # grades 1..5, attendees only
    n_attendees: int
    failure_rate: float | None


def grade_distribution(features: Iterable[StudentFeatures]) -> GradeDistribution:
    counts = {grade: 0 for grade in range(1, 6)}
    for student in features:
        if not 1 <= student.grade <= 6:
            raise InputError(f"student {student.student_id}: grade {student.grade} outside 1..6")
        if student.attended:
            counts[student.grade] += 1
    n_attendees = sum(counts.values())
    failure_rate = counts[5] / n_attendees if n_attendees else None
    return GradeDistribution(counts, n_attendees, failure_rate)


@dataclass
class AttendanceCrosstab:
    """Counts of (warning, attended) cells; keys are (0|1, 0|1)."""

    cells: dict[tuple[int, int], int]

    def total(self) -> int:
        return sum(self.cells.values())


def attendance_crosstab(
    features: Iterable[StudentFeatures], treatment: Mapping[str, int]
) -> AttendanceCrosstab:
    cells = {(w, a): 0 for w in (0, 1) for a in (0, 1)}
    for student in features:
        if student.student_id not in treatment:
            raise InputError(f"no treatment flag for student {student.student_id}")
        warned = 1 if treatment[student.student_id] else 0
        cells[(warned, 1 if student.attended else 0)] += 1
    return AttendanceCrosstab(cells)


def _grade_from_exams(exams: list[ExamRecord], grade_bounds) -> tuple[int, bool, float | None]:
    """Return (grade, passed_any, latest points).

    Grade comes from the best attempt, the outcome Y from the latest one.
    """
    if not exams:
        return 6, False, None
    by_attempt = sorted(exams, key=lambda record: record.attempt)
    for earlier, later in zip(by_attempt, by_attempt[1:]):
        if earlier.passed:
            raise InputError(
                f"student {earlier.student_id}: passed attempt {earlier.attempt} "
                f"followed by attempt {later.attempt}"
            )
    best = max(record.points for record in by_attempt)
    passed_any = any(record.passed for record in by_attempt)
    if not passed_any:
        grade = 5
    else:
        b1, b2, b3 = grade_bounds
        if best >= b1:
            grade = 1
        elif best >= b2:
            grade = 2
        elif best >= b3:
            grade = 3
        else:
            grade = 4
    return grade, passed_any, by_attempt[-1].points


def build_features(
    submissions: Sequence[SubmissionRecord],
    tests: Sequence[OnlineTestRecord],
    exams: Sequence[ExamRecord],
    score_dates: Iterable[date] = (),
    periods: Iterable[tuple[date, date]] = (),
    begin_dates: Iterable[date] = (),
    grade_bounds: tuple[float, float, float] = DEFAULT_GRADE_BOUNDS,
) -> list[StudentFeatures]:
    """Assemble per-student features for every student seen in any source.

    Missing online tests count as 0 points (participation was optional).
    """
    score_dates = list(score_dates)
    periods = list(periods)
    begin_dates = list(begin_dates)

    submissions_by_student: dict[str, list[SubmissionRecord]] = defaultdict(list)
    for record in submissions:
        submissions_by_student[record.student_id].append(record)
    tests_by_student: dict[str, list[OnlineTestRecord]] = defaultdict(list)
    for record in tests:
        tests_by_student[record.student_id].append(record)
    exams_by_student: dict[str, list[ExamRecord]] = defaultdict(list)
    for record in exams:
        exams_by_student[record.student_id].append(record)

    student_ids = sorted(
        set(submissions_by_student) | set(tests_by_student) | set(exams_by_student)
    )

    features = []
    for student_id in student_ids:
        own = submissions_by_student.get(student_id, [])
        test_points = {index: 0.0 for index in range(1, N_ONLINE_TESTS + 1)}
        for record in tests_by_student.get(student_id, []):
            test_points[record.test_index] = record.points
        grade, passed_any, latest_points = _grade_from_exams(
            exams_by_student.get(student_id, []), grade_bounds
        )
        features.append(
            StudentFeatures(
                student_id=student_id,
                submissions_total=len(own),
                testate_points=float(sum(test_points.values())),
                test_points=test_points,
                score_at={t: compute_score(own, student_id, t) for t in score_dates},
                submissions_in_period={
                    period: count_submissions(own, student_id, period) for period in periods
                },
                begun_exercises_at={t: begun_exercises(own, student_id, t) for t in begin_dates},
                grade=grade,
                attended=bool(exams_by_student.get(student_id)),
                passed=passed_any,
                exam_points=latest_points,
            )
        )
    return features
