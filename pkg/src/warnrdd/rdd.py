"""Local sharp and fuzzy discontinuity estimation.

All regressions use a uniform kernel: observations inside the window
enter with unit weight.  The default specification includes a
slope-change term Z*W next to the running variable, and the joint
F-test covers every slope in the local regression.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EstimationError, InputError
from .linear import (
    FTestResult,
    LinearFit,
    joint_f_test,
    ols,
    two_sided_normal_p,
    two_stage_ls,
)
from .treatment import AnalysisRow

DEFAULT_MULTIPLIERS = (1.0, 0.5, 2.0)
_LABELS = {1.0: "LATE", 0.5: "Half-BW", 2.0: "Double-BW"}


@dataclass
class RddConfig:
    cutoff: float = 0.4
    bandwidth: float = 0.255
    use_covariates: bool = True
    include_interaction: bool = True  # slope-change term Z*W
    multipliers: tuple[float, ...] = DEFAULT_MULTIPLIERS
    robust: bool = False
    f_test_on: str = "second_stage"  # or "reduced_form"

    def validate(self) -> None:
        if self.bandwidth <= 0.0:
            raise InputError(f"bandwidth {self.bandwidth} must be positive")
        if any(m <= 0.0 for m in self.multipliers):
            raise InputError("bandwidth multipliers must be positive")
        if self.f_test_on not in ("second_stage", "reduced_form"):
            raise InputError(f"unknown f_test_on mode {self.f_test_on!r}")


@dataclass
class RddFit:
    label: str
    bandwidth: float
    n_window: int
    estimate: float
    std_error: float
    z_value: float
    p_value: float
    f_test: FTestResult
    first_stage: LinearFit | None = None
    weak_instrument: bool = False
    first_stage_f: float | None = None
    fit: LinearFit | None = None


@dataclass
class BinnedSeries:
    bin_midpoints: list[float]
    bin_means: list[float]
    bin_counts: list[int]


def window(rows: Sequence[AnalysisRow], cutoff: float, bandwidth: float) -> list[AnalysisRow]:
    """Rows with |W - cutoff| <= bandwidth (closed window, unit weights)."""
    if bandwidth <= 0.0:
        raise InputError(f"bandwidth {bandwidth} must be positive")
    selected = [row for row in rows if abs(row.w - cutoff) <= bandwidth]
    if not selected:
        raise EstimationError(
            f"no observations in bandwidth {bandwidth} around cutoff {cutoff}"
        )
    return selected


def _arrays(rows: Sequence[AnalysisRow]):
    w = np.array([row.w for row in rows])
    z = np.array([float(row.z) for row in rows])
    t = np.array([float(row.t) for row in rows])
    y = np.array([row.y for row in rows])
    n_cov = len(rows[0].x)
    if any(len(row.x) != n_cov for row in rows):
        raise InputError("covariate vectors differ in length across rows")
    x = np.array([row.x for row in rows]).reshape(len(rows), n_cov)
    return w, z, t, y, x


def _exogenous(w, z, x, config: RddConfig):
    columns = [w]
    names = ["W"]
    if config.include_interaction:
        columns.append(z * w)
        names.append("Z*W")
    if config.use_covariates:
        for j in range(x.shape[1]):
            columns.append(x[:, j])
            names.append(f"X{j + 1}" if x.shape[1] > 1 else "X")
    return np.column_stack(columns), names


def _label(multiplier: float) -> str:
    return _LABELS.get(multiplier, f"{multiplier:g}x-BW")


def estimate_late(rows: Sequence[AnalysisRow], config: RddConfig) -> list[RddFit]:
    """Fuzzy estimates at bandwidth h * m for every configured multiplier."""
    config.validate()
    fits = []
    for multiplier in config.multipliers:
        h = config.bandwidth * multiplier
        sub = window(rows, config.cutoff, h)
        w, z, t, y, x = _arrays(sub)
        exog, exog_names = _exogenous(w, z, x, config)
        tsls = two_stage_ls(y, t, exog, z, exogenous_names=exog_names, robust=config.robust)
        if config.f_test_on == "second_stage":
            f_design = tsls.design
        else:
            f_design = np.column_stack([np.ones(len(sub)), z, exog])
        f_result = joint_f_test(y, f_design)
        estimate = float(tsls.fit.coefficients[1])
        std_error = float(tsls.fit.std_errors[1])
        z_value = estimate / std_error
        fits.append(
            RddFit(
                label=_label(multiplier),
                bandwidth=h,
                n_window=len(sub),
                estimate=estimate,
                std_error=std_error,
                z_value=z_value,
                p_value=two_sided_normal_p(z_value),
                f_test=f_result,
                first_stage=tsls.first_stage,
                weak_instrument=tsls.weak_instrument,
                first_stage_f=tsls.first_stage_f,
                fit=tsls.fit,
            )
        )
    return fits


def sharp_rdd(rows: Sequence[AnalysisRow], config: RddConfig) -> RddFit:
    """OLS step estimate; only valid when everyone complies with the cutoff."""
    config.validate()
    sub = window(rows, config.cutoff, config.bandwidth)
    w, z, t, y, x = _arrays(sub)
    if np.any(t != z):
        raise EstimationError(
            "design is fuzzy (treatment differs from the cutoff rule); use estimate_late"
        )
    exog, exog_names = _exogenous(w, z, x, config)
    design = np.column_stack([np.ones(len(sub)), t, exog])
    fit = ols(y, design, column_names=["const", "T"] + exog_names, robust=config.robust)
    f_result = joint_f_test(y, design)
    estimate = float(fit.coefficients[1])
    std_error = float(fit.std_errors[1])
    z_value = estimate / std_error
    return RddFit(
        label="Sharp",
        bandwidth=config.bandwidth,
        n_window=len(sub),
        estimate=estimate,
        std_error=std_error,
        z_value=z_value,
        p_value=two_sided_normal_p(z_value),
        f_test=f_result,
        fit=fit,
    )


def binned_means(rows: Sequence[AnalysisRow], cutoff: float, bin_width: float) -> BinnedSeries:
    """Per-bin outcome means with bins aligned so the cutoff is an edge."""
    if bin_width <= 0.0:
        raise InputError("bin width must be positive")
    totals: dict[int, float] = {}
    counts: dict[int, int] = {}
    for row in rows:
        index = int(np.floor((row.w - cutoff) / bin_width))
        totals[index] = totals.get(index, 0.0) + row.y
        counts[index] = counts.get(index, 0) + 1
    midpoints, means, sizes = [], [], []
    for index in sorted(counts):
        midpoints.append(cutoff + (index + 0.5) * bin_width)
        means.append(totals[index] / counts[index])
        sizes.append(counts[index])
    return BinnedSeries(midpoints, means, sizes)
