"""Toolkit for estimating the effect of early-warning emails with a fuzzy
regression-discontinuity design, from raw e-assessment logs to validated
treatment-effect estimates."""

from .bandwidth import BandwidthDiagnostics, ik_bandwidth
from .cohort import (
    ExamRecord,
    OnlineTestRecord,
    StudentFeatures,
    SubmissionRecord,
    attendance_crosstab,
    begun_exercises,
    build_features,
    compute_score,
    count_submissions,
    grade_distribution,
    ingest_exams,
    ingest_online_tests,
    ingest_submissions,
)
from .dgp import DgpSpec, generate, true_late
from .errors import EstimationError, InputError, NumericError, SeparationError, WarnRddError
from .linear import (
    FTestResult,
    LinearFit,
    TwoStageFit,
    f_survival,
    joint_f_test,
    ols,
    regularized_incomplete_beta,
    two_stage_ls,
)
from .logit import LogitModel, fit_logit, load_model, predict_pass_probability, save_model
from .mccrary import McCraryResult, density_curve_export, mccrary_test
from .rdd import (
    BinnedSeries,
    RddConfig,
    RddFit,
    binned_means,
    estimate_late,
    sharp_rdd,
    window,
)
from .treatment import (
    AnalysisRow,
    Assignment,
    AssignmentConfig,
    Override,
    assign,
    build_analysis_dataset,
    override_fraction,
    read_analysis_csv,
    write_analysis_csv,
)

__version__ = "0.1.0"
