"""Linear estimators: QR-based OLS, two-stage least squares, F-test.

Coefficients come from an orthogonal factorization, never from inverting
normal equations.  The F-distribution tail is evaluated with an
in-house regularized incomplete beta (Lentz continued fraction), so
inference does not depend on an external stats library.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EstimationError, NumericError

RANK_TOL = 1e-10  # singular values below RANK_TOL * s_max count as zero
WEAK_F_THRESHOLD = 10.0


@dataclass
class LinearFit:
    coefficients: np.ndarray
    covariance: np.ndarray
    residuals: np.ndarray
    n: int
    k: int
    sigma2: float
    column_names: list[str] = field(default_factory=list)

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


@dataclass
class FTestResult:
    statistic: float
    df_num: int
    df_den: int
    p_value: float


@dataclass
class TwoStageFit:
    """Second-stage fit plus the first stage and instrument diagnostics."""

    fit: LinearFit
    first_stage: LinearFit
    fitted_endogenous: np.ndarray
    design: np.ndarray  # second-stage design (with fitted endogenous)
    first_stage_f: float
    weak_instrument: bool


def _column_names(k: int, names) -> list[str]:
    if names is None:
        return ["const"] + [f"x{i}" for i in range(1, k)]
    names = list(names)
    if len(names) != k:
        raise EstimationError(f"expected {k} column names, got {len(names)}")
    return names


def _check_rank(X: np.ndarray, names: list[str]) -> None:
    s = np.linalg.svd(X, compute_uv=False)
    if s[0] == 0.0 or s[-1] < RANK_TOL * s[0]:
        # walk the columns to name the first one that adds no rank
        rank = 0
        for j in range(X.shape[1]):
            block = X[:, : j + 1]
            sj = np.linalg.svd(block, compute_uv=False)
            new_rank = int(np.sum(sj > RANK_TOL * sj[0])) if sj[0] > 0 else 0
            if new_rank == rank:
                raise EstimationError(
                    f"design matrix is rank deficient: column '{names[j]}' "
                    "is linearly dependent on earlier columns"
                )
            rank = new_rank
        raise EstimationError("design matrix is rank deficient")


def ols(y, X, column_names=None, robust: bool = False) -> LinearFit:
    """Least squares of y on X (X must already contain the intercept)."""
    y = np.asarray(y, dtype=float).ravel()
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise EstimationError("design matrix must be 2-dimensional")
    n, k = X.shape
    if y.shape[0] != n:
        raise EstimationError("outcome and design row counts differ")
    if n <= k:
        raise EstimationError(f"need more observations than regressors (n={n}, k={k})")
    names = _column_names(k, column_names)
    _check_rank(X, names)

    Q, R = np.linalg.qr(X)
    beta = np.linalg.solve(R, Q.T @ y)
    residuals = y - X @ beta
    rss = float(residuals @ residuals)
    sigma2 = rss / (n - k)
    r_inv = np.linalg.solve(R, np.eye(k))
    xtx_inv = r_inv @ r_inv.T
    if robust:
        meat = X.T @ (X * (residuals**2)[:, None])
        covariance = xtx_inv @ meat @ xtx_inv
    else:
        covariance = sigma2 * xtx_inv
    covariance = 0.5 * (covariance + covariance.T)
    return LinearFit(beta, covariance, residuals, n, k, sigma2, names)


def two_stage_ls(
    y,
    endogenous,
    exogenous,
    instrument,
    exogenous_names=None,
    robust: bool = False,
) -> TwoStageFit:
    """2SLS with one endogenous regressor and a single excluded instrument.

    Stage 1 regresses the endogenous variable on the instrument and all
    exogenous columns; stage 2 swaps in the fitted values.  The reported
    covariance is the standard 2SLS correction: residuals are recomputed
    with the original endogenous regressor.
    """
    y = np.asarray(y, dtype=float).ravel()
    t = np.asarray(endogenous, dtype=float).ravel()
    z = np.asarray(instrument, dtype=float).ravel()
    W = np.asarray(exogenous, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    n = y.shape[0]
    if not (t.shape[0] == z.shape[0] == W.shape[0] == n):
        raise EstimationError("2SLS inputs differ in length")
    if np.ptp(z) == 0.0:
        raise EstimationError("instrument has no variation inside bandwidth")

    if exogenous_names is None:
        exogenous_names = [f"w{i}" for i in range(1, W.shape[1] + 1)]
    ones = np.ones(n)
    stage1_design = np.column_stack([ones, z, W])
    first = ols(t, stage1_design, column_names=["const", "z"] + list(exogenous_names))
    t_hat = stage1_design @ first.coefficients

    design = np.column_stack([ones, t_hat, W])
    names = ["const", "t_hat"] + list(exogenous_names)
    stage2 = ols(y, design, column_names=names)
    beta = stage2.coefficients

    # structural residuals use the original endogenous column
    structural = np.column_stack([ones, t, W])
    residuals = y - structural @ beta
    k = design.shape[1]
    sigma2 = float(residuals @ residuals) / (n - k)
    Q, R = np.linalg.qr(design)
    r_inv = np.linalg.solve(R, np.eye(k))
    xtx_inv = r_inv @ r_inv.T
    if robust:
        meat = design.T @ (design * (residuals**2)[:, None])
        covariance = xtx_inv @ meat @ xtx_inv
    else:
        covariance = sigma2 * xtx_inv
    covariance = 0.5 * (covariance + covariance.T)
    fit = LinearFit(beta, covariance, residuals, n, k, sigma2, names)

    gamma1 = first.coefficients[1]
    se1 = first.std_errors[1]
    first_stage_f = float((gamma1 / se1) ** 2) if se1 > 0 else math.inf
    return TwoStageFit(
        fit=fit,
        first_stage=first,
        fitted_endogenous=t_hat,
        design=design,
        first_stage_f=first_stage_f,
        weak_instrument=first_stage_f < WEAK_F_THRESHOLD,
    )


def joint_f_test(y, X, column_names=None) -> FTestResult:
    """Joint nullity of all slope coefficients (everything but the intercept)."""
    y = np.asarray(y, dtype=float).ravel()
    X = np.asarray(X, dtype=float)
    n, k = X.shape
    if k < 2:
        raise EstimationError("joint F-test needs at least one slope column")
    df_den = n - k
    if df_den <= 0:
        raise EstimationError(f"no denominator degrees of freedom (n={n}, k={k})")
    df_num = k - 1
    fit = ols(y, X, column_names=column_names)
    rss_full = float(fit.residuals @ fit.residuals)
    centered = y - y.mean()
    rss_restricted = float(centered @ centered)
    if rss_full <= 0.0:
        return FTestResult(math.inf, df_num, df_den, 0.0)
    statistic = ((rss_restricted - rss_full) / df_num) / (rss_full / df_den)
    statistic = max(statistic, 0.0)
    return FTestResult(statistic, df_num, df_den, f_survival(statistic, df_num, df_den))


# --- distribution tails ---------------------------------------------------


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Lentz's algorithm for the incomplete beta continued fraction."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 500):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise NumericError(f"incomplete beta continued fraction failed to converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) accurate to ~1e-14 for moderate parameters."""
    if a <= 0 or b <= 0:
        raise NumericError("incomplete beta needs positive parameters")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def f_survival(statistic: float, df_num: int, df_den: int) -> float:
    """P(F >= statistic) for an F(df_num, df_den) variate."""
    if statistic <= 0.0:
        return 1.0
    if math.isinf(statistic):
        return 0.0
    x = df_den / (df_den + df_num * statistic)
    return regularized_incomplete_beta(df_den / 2.0, df_num / 2.0, x)


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def two_sided_normal_p(z: float) -> float:
    return math.erfc(abs(z) / math.sqrt(2.0))
