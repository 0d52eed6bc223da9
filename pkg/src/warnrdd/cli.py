"""Command-line front end.

Subcommands: features, predict, assign, analyze, mccrary, bandwidth,
simulate.  A JSON config file can provide any flag's value; explicit
flags win.  Exit codes: 0 success, 2 input validation, 3 estimation
validity failure, 4 internal numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from datetime import date, datetime
from pathlib import Path

import numpy as np

from . import bandwidth as bw
from . import cohort, dgp, figures, logit, mccrary, rdd, report, treatment
from .errors import InputError, NumericError, WarnRddError

DEFAULT_CUTOFF = 0.4
DEFAULT_BIN_WIDTH = 0.05
DEFAULT_FEATURE_COLUMNS = ["test_1", "test_2", "test_3", "test_4"]


# --- config handling ------------------------------------------------------


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as handle:
            config = json.load(handle)
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise InputError(f"config file {path}: invalid JSON ({err})") from None
    if not isinstance(config, dict):
        raise InputError(f"config file {path}: expected a JSON object")
    return config


def _setting(args, config: dict, name: str, default=None):
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in config:
        return config[name]
    return default


def _parse_date(value: str) -> date:
    try:
        return datetime.strptime(value, "%Y-%m-%d").date()
    except ValueError:
        raise InputError(f"bad date {value!r}, expected YYYY-MM-DD") from None


def _parse_multipliers(value) -> tuple[float, ...]:
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    try:
        parsed = tuple(float(part) for part in str(value).split(",") if part.strip())
    except ValueError:
        raise InputError(f"bad multipliers {value!r}, expected comma-separated numbers") from None
    if not parsed:
        raise InputError("multipliers list is empty")
    return parsed


def _out_dir(args, config) -> Path:
    out = Path(_setting(args, config, "out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(args, config, name: str):
    value = _setting(args, config, name)
    if value is None:
        raise InputError(f"missing required input: --{name.replace('_', '-')}")
    return value


# --- features CSV ---------------------------------------------------------


def _features_columns(features: list[cohort.StudentFeatures]) -> list[str]:
    columns = ["student_id", "submissions_total"]
    columns += [f"test_{i}" for i in range(1, cohort.N_ONLINE_TESTS + 1)]
    columns.append("testate_points")
    if features:
        sample = features[0]
        columns += [f"score_{d.isoformat()}" for d in sorted(sample.score_at)]
        columns += [f"begun_{d.isoformat()}" for d in sorted(sample.begun_exercises_at)]
        columns += [
            f"period_{p[0].isoformat()}_{p[1].isoformat()}"
            for p in sorted(sample.submissions_in_period)
        ]
    columns += ["grade", "attended", "passed", "exam_points"]
    return columns


def write_features_csv(features: list[cohort.StudentFeatures], path) -> None:
    columns = _features_columns(features)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for student in sorted(features, key=lambda s: s.student_id):
            row = [student.student_id, student.submissions_total]
            row += [repr(student.test_points[i]) for i in range(1, cohort.N_ONLINE_TESTS + 1)]
            row.append(repr(student.testate_points))
            row += [repr(student.score_at[d]) for d in sorted(student.score_at)]
            row += [student.begun_exercises_at[d] for d in sorted(student.begun_exercises_at)]
            row += [
                student.submissions_in_period[p] for p in sorted(student.submissions_in_period)
            ]
            row += [
                student.grade,
                int(student.attended),
                int(student.passed),
                "" if student.exam_points is None else repr(student.exam_points),
            ]
            writer.writerow(row)


def read_features_csv(path) -> list[dict]:
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            return list(csv.DictReader(handle))
    except FileNotFoundError:
        raise InputError(f"features file not found: {path}") from None


def _feature_matrix(rows: list[dict], columns: list[str], path) -> np.ndarray:
    matrix = []
    for i, row in enumerate(rows, start=2):
        values = []
        for column in columns:
            if column not in row or row[column] in (None, ""):
                raise InputError(f"{path}, line {i}: missing feature column {column}")
            try:
                values.append(float(row[column]))
            except ValueError:
                raise InputError(f"{path}, line {i}: non-numeric {column}") from None
        matrix.append(values)
    return np.asarray(matrix)


# --- subcommands ----------------------------------------------------------


def cmd_features(args, config) -> int:
    submissions = cohort.ingest_submissions(_require(args, config, "submissions"))
    tests = cohort.ingest_online_tests(_require(args, config, "tests"))
    exams = cohort.ingest_exams(_require(args, config, "exams"))
    score_dates = [_parse_date(v) for v in (args.score_date or config.get("score_dates", []))]
    begin_dates = [_parse_date(v) for v in (args.begin_date or config.get("begin_dates", []))]
    periods = []
    for value in args.period or config.get("periods", []):
        parts = str(value).split(":")
        if len(parts) != 2:
            raise InputError(f"bad period {value!r}, expected START:END dates")
        periods.append((_parse_date(parts[0]), _parse_date(parts[1])))

    features = cohort.build_features(
        submissions, tests, exams, score_dates=score_dates, periods=periods, begin_dates=begin_dates
    )
    out = _out_dir(args, config)
    write_features_csv(features, out / "features.csv")

    n_students = len(features)
    n_attendees = sum(1 for s in features if s.attended)
    n_passed = sum(1 for s in features if s.passed)
    n_submissions = len(submissions)
    sections = [
        "Descriptive statistics",
        "======================",
        "quartile convention: linear interpolation between order statistics",
        "\n".join(
            [
                "Cohort overview",
                "---------------",
                f"students in course: {n_students}",
                f"exam attendees: {n_attendees}",
                f"passed an exam: {n_passed}",
                f"homework submissions: {n_submissions}",
                "submissions per student (exact quotient): "
                + (report.sig3(n_submissions / n_students) if n_students else "undefined"),
            ]
        ),
        report.format_grade_distribution(cohort.grade_distribution(features)),
    ]

    roster_path = _setting(args, config, "roster")
    if roster_path is not None:
        assignments = treatment.read_roster_csv(roster_path)
        flags = {a.student_id: a.t for a in assignments}
        sections.append(report.format_crosstab(cohort.attendance_crosstab(features, flags)))
        exam_groups = {}
        testate_groups = {}
        for label, warned in (("warning=0", 0), ("warning=1", 1)):
            group = [s for s in features if flags.get(s.student_id) == warned]
            exam_groups[label] = report.summary_stats(
                s.exam_points for s in group if s.exam_points is not None
            )
            testate_groups[label] = report.summary_stats(s.testate_points for s in group)
        sections.append(
            "Group summaries\n---------------\n"
            + report.format_group_summaries("exam points", exam_groups)
            + "\n"
            + report.format_group_summaries("testate points", testate_groups)
        )

    (out / "descriptives.txt").write_text(report.render_report(sections), encoding="utf-8")
    print(f"wrote {out / 'features.csv'} and {out / 'descriptives.txt'}")
    return 0


def cmd_predict(args, config) -> int:
    out = _out_dir(args, config)
    feature_columns = list(
        _setting(args, config, "feature_columns", DEFAULT_FEATURE_COLUMNS)
    )
    if isinstance(feature_columns, str):
        feature_columns = [part.strip() for part in feature_columns.split(",")]

    model_path = _setting(args, config, "model")
    train_path = _setting(args, config, "train")
    if model_path is not None:
        model = logit.load_model(model_path)
    elif train_path is not None:
        rows = read_features_csv(train_path)
        if args.drop_noshows:
            rows = [row for row in rows if row.get("attended", "1").strip() == "1"]
        if not rows:
            raise InputError(f"training set {train_path} is empty")
        X = _feature_matrix(rows, feature_columns, train_path)
        # no-shows default to passed = 0, consistent with the grade-6 rule
        y = np.array([float(row.get("passed", "0") or 0) for row in rows])
        model = logit.fit_logit(X, y, feature_names=feature_columns)
        logit.save_model(model, out / "model.json")
    else:
        raise InputError("predict needs --train or --model")

    current = read_features_csv(_require(args, config, "features"))
    X = _feature_matrix(current, model.feature_names, _setting(args, config, "features"))
    with open(out / "predictions.csv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["student_id", "W"])
        predictions = [
            (row["student_id"], logit.predict_pass_probability(model, X[i]))
            for i, row in enumerate(current)
        ]
        for student_id, w in sorted(predictions):
            writer.writerow([student_id, repr(round(w, treatment.W_DECIMALS))])
    print(f"wrote {out / 'predictions.csv'}")
    return 0


def _read_predictions(path) -> dict[str, float]:
    probabilities = {}
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            for row in reader:
                if "student_id" not in row or "W" not in row:
                    raise InputError(f"{path}: expected columns student_id,W")
                probabilities[row["student_id"].strip()] = float(row["W"])
    except FileNotFoundError:
        raise InputError(f"predictions file not found: {path}") from None
    except ValueError:
        raise InputError(f"{path}: non-numeric probability") from None
    return probabilities


def cmd_assign(args, config) -> int:
    out = _out_dir(args, config)
    probabilities = _read_predictions(_require(args, config, "predictions"))
    overrides_path = _setting(args, config, "overrides")
    overrides = treatment.read_overrides_csv(overrides_path) if overrides_path else {}
    assignment_config = treatment.AssignmentConfig(
        cutoff=float(_setting(args, config, "cutoff", DEFAULT_CUTOFF)),
        severe_cutoff=(
            float(args.severe_cutoff)
            if args.severe_cutoff is not None
            else config.get("severe_cutoff")
        ),
        overrides=overrides,
    )
    assignments = treatment.assign(probabilities, assignment_config)
    treatment.write_roster_csv(assignments, out / "roster.csv")
    fraction = treatment.override_fraction(assignments)
    print(f"wrote {out / 'roster.csv'} ({len(assignments)} students, "
          f"override fraction {fraction:.4f})")
    return 0


def _load_analysis_rows(args, config) -> list[treatment.AnalysisRow]:
    analysis_path = _setting(args, config, "analysis")
    if analysis_path is not None:
        try:
            return treatment.read_analysis_csv(analysis_path)
        except FileNotFoundError:
            raise InputError(f"analysis file not found: {analysis_path}") from None
    features_path = _setting(args, config, "features")
    roster_path = _setting(args, config, "roster")
    if features_path is None or roster_path is None:
        raise InputError("analyze needs --analysis, or --features together with --roster")
    feature_rows = read_features_csv(features_path)
    assignments = {a.student_id: a for a in treatment.read_roster_csv(roster_path)}
    rows = []
    for record in feature_rows:
        student_id = record["student_id"].strip()
        if record.get("attended", "0").strip() != "1":
            continue
        if student_id not in assignments:
            raise InputError(f"no roster entry for student {student_id}")
        assignment = assignments[student_id]
        rows.append(
            treatment.AnalysisRow(
                student_id=student_id,
                w=assignment.w,
                z=assignment.z,
                t=assignment.t,
                y=float(record["exam_points"]),
                x=(float(record["testate_points"]),),
                attended=True,
            )
        )
    rows.sort(key=lambda r: r.student_id)
    if not rows:
        raise InputError("no attending students to analyze")
    return rows


def _resolve_bandwidth(value, rows, cutoff):
    if value in (None, "auto"):
        diag = bw.ik_bandwidth([r.w for r in rows], [r.y for r in rows], cutoff)
        return diag.h_opt, diag
    try:
        return float(value), None
    except ValueError:
        raise InputError(f"bad bandwidth {value!r}, expected a number or 'auto'") from None


def cmd_analyze(args, config) -> int:
    out = _out_dir(args, config)
    rows = _load_analysis_rows(args, config)
    cutoff = float(_setting(args, config, "cutoff", DEFAULT_CUTOFF))
    h, diag = _resolve_bandwidth(_setting(args, config, "bandwidth", "auto"), rows, cutoff)
    multipliers = _parse_multipliers(_setting(args, config, "multipliers", "1.0,0.5,2.0"))
    no_covariates = bool(args.no_covariates or config.get("no_covariates", False))
    bin_width = float(_setting(args, config, "bin_width", DEFAULT_BIN_WIDTH))

    sections = ["Discontinuity analysis report", "============================="]
    if diag is not None:
        sections.append(report.format_bandwidth_section(diag))

    density = mccrary.mccrary_test([r.w for r in rows], cutoff)
    sections.append(report.format_mccrary_section(density))

    has_covariates = bool(rows[0].x) and not no_covariates
    if has_covariates:
        with_cov = rdd.estimate_late(
            rows,
            rdd.RddConfig(cutoff=cutoff, bandwidth=h, use_covariates=True, multipliers=multipliers),
        )
        sections.append(report.format_rdd_section("Fuzzy RDD estimates (with covariates)", with_cov))
    without_cov = rdd.estimate_late(
        rows,
        rdd.RddConfig(cutoff=cutoff, bandwidth=h, use_covariates=False, multipliers=multipliers),
    )
    sections.append(
        report.format_rdd_section("Fuzzy RDD estimates (without covariates)", without_cov)
    )

    if all(r.t == r.z for r in rows):
        sharp = rdd.sharp_rdd(
            rows, rdd.RddConfig(cutoff=cutoff, bandwidth=h, use_covariates=False)
        )
        fuzzy_base = next(f for f in without_cov if abs(f.bandwidth - h) < 1e-12)
        if abs(sharp.estimate - fuzzy_base.estimate) < 1e-8:
            sections.append(
                "note: every student complies with the cutoff rule; "
                "fuzzy and sharp estimates agree "
                f"({report.sig3(sharp.estimate)})"
            )

    binned = rdd.binned_means(rows, cutoff, bin_width)
    with open(out / "rdd_bins.csv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["bin_midpoint", "bin_mean", "bin_count"])
        for mid, mean, count in zip(binned.bin_midpoints, binned.bin_means, binned.bin_counts):
            writer.writerow([repr(mid), repr(mean), count])
    _write_mccrary_csv(density, out / "mccrary.csv")

    report_text = report.render_report(sections)
    (out / "report.txt").write_text(report_text, encoding="utf-8")

    if not (args.no_figures or config.get("no_figures", False)):
        figures.save_rdd_figure(binned, cutoff, out / "rdd_plot.png")
        figures.save_mccrary_figure(density, cutoff, out / "mccrary_plot.png")

    print(f"wrote {out / 'report.txt'}")
    return 0


def _write_mccrary_csv(result, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["W", "density", "side"])
        for x, density, side in mccrary.density_curve_export(result):
            writer.writerow([repr(x), repr(density), side])


def cmd_mccrary(args, config) -> int:
    out = _out_dir(args, config)
    rows = _load_analysis_rows(args, config)
    cutoff = float(_setting(args, config, "cutoff", DEFAULT_CUTOFF))
    result = mccrary.mccrary_test(
        [r.w for r in rows],
        cutoff,
        bin_width=args.bin_size,
        bandwidth=args.density_bandwidth,
    )
    _write_mccrary_csv(result, out / "mccrary.csv")
    if not (args.no_figures or config.get("no_figures", False)):
        figures.save_mccrary_figure(result, cutoff, out / "mccrary_plot.png")
    print(report.format_mccrary_section(result))
    return 0


def cmd_bandwidth(args, config) -> int:
    rows = _load_analysis_rows(args, config)
    cutoff = float(_setting(args, config, "cutoff", DEFAULT_CUTOFF))
    diag = bw.ik_bandwidth([r.w for r in rows], [r.y for r in rows], cutoff)
    print(report.format_bandwidth_section(diag))
    return 0


def cmd_simulate(args, config) -> int:
    out = _out_dir(args, config)
    spec = dgp.load_spec(_require(args, config, "spec"))
    seed = _setting(args, config, "seed")
    if seed is not None:
        spec.seed = int(seed)
    rows = dgp.generate(spec)
    treatment.write_analysis_csv(rows, out / "analysis.csv")
    dgp.write_truth(spec, out / "truth.json")
    print(f"wrote {out / 'analysis.csv'} and {out / 'truth.json'} "
          f"(n={spec.n}, seed={spec.seed})")
    return 0


# --- parser ---------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--out", help="output directory (default: current directory)")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (results do not depend on this)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="warnrdd",
        description="Early-warning intervention analysis: features, pass prediction, "
        "treatment assignment and fuzzy discontinuity estimation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", help="build per-student features and descriptives")
    p.add_argument("--submissions")
    p.add_argument("--tests")
    p.add_argument("--exams")
    p.add_argument("--score-date", action="append")
    p.add_argument("--begin-date", action="append")
    p.add_argument("--period", action="append", metavar="START:END")
    p.add_argument("--roster", help="roster.csv for the attendance crosstab")
    _add_common(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("predict", help="fit/apply the pass-probability logit")
    p.add_argument("--train", help="prior-cohort features.csv with a passed column")
    p.add_argument("--model", help="reuse a saved model.json instead of training")
    p.add_argument("--features", help="current-cohort features.csv")
    p.add_argument("--feature-columns", dest="feature_columns")
    p.add_argument("--drop-noshows", action="store_true",
                   help="exclude no-show students from training instead of coding them as fail")
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("assign", help="apply the cutoff rule and overrides")
    p.add_argument("--predictions")
    p.add_argument("--overrides")
    p.add_argument("--cutoff", type=float)
    p.add_argument("--severe-cutoff", dest="severe_cutoff", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("analyze", help="run the full discontinuity analysis")
    p.add_argument("--analysis")
    p.add_argument("--features")
    p.add_argument("--roster")
    p.add_argument("--cutoff", type=float)
    p.add_argument("--bandwidth", help="number or 'auto' for data-driven selection")
    p.add_argument("--multipliers")
    p.add_argument("--no-covariates", action="store_true", default=None)
    p.add_argument("--bin-width", dest="bin_width", type=float)
    p.add_argument("--no-figures", action="store_true", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("mccrary", help="density discontinuity (sorting) test")
    p.add_argument("--analysis")
    p.add_argument("--features")
    p.add_argument("--roster")
    p.add_argument("--cutoff", type=float)
    p.add_argument("--bin-size", type=float)
    p.add_argument("--density-bandwidth", type=float)
    p.add_argument("--no-figures", action="store_true", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_mccrary)

    p = sub.add_parser("bandwidth", help="data-driven bandwidth diagnostics")
    p.add_argument("--analysis")
    p.add_argument("--features")
    p.add_argument("--roster")
    p.add_argument("--cutoff", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_bandwidth)

    p = sub.add_parser("simulate", help="generate a synthetic dataset with known truth")
    p.add_argument("--spec", help="JSON generator spec")
    p.add_argument("--seed", type=int)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(getattr(args, "config", None))
        return args.func(args, config)
    except WarnRddError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.exit_code
    except np.linalg.LinAlgError as err:
        print(f"numeric error: {err}", file=sys.stderr)
        return NumericError.exit_code


if __name__ == "__main__":
    sys.exit(main())
