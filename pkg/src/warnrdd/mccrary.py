"""Density-discontinuity (sorting) test for the running variable.

Two stages: an undersmoothed histogram whose bin edges include the
cutoff exactly, then side-by-side local linear regressions of the
normalized bin heights with a triangular kernel.  The log difference of
the boundary density estimates is the test statistic; bin width and
bandwidth default to McCrary's (2008) automatic selectors, whose
constants assume the triangular kernel (hence no kernel option).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EstimationError, NumericError
from .linear import two_sided_normal_p

MIN_PER_SIDE = 20
CURVE_POINTS_PER_SIDE = 25
_AUTO_H_CONSTANT = 3.348  # second-stage selector constant, triangular kernel


@dataclass
class McCraryResult:
    theta: float  # log f(c+) - log f(c-)
    std_error: float
    z: float
    p_value: float
    bin_width: float
    bandwidth: float
    f_left: float
    f_right: float
    n: int
    n_left: int
    n_right: int
    curve: list[tuple[float, float, str]]  # (grid point, density, side)


def _histogram(w: np.ndarray, c: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Bin midpoints and normalized heights; the cutoff is a bin edge.

    The grid is dense between the extreme occupied bins, so interior
    empty bins contribute genuine zeros to the smoothing stage.
    """
    idx = np.floor((w - c) / b).astype(int)
    lo, hi = idx.min(), idx.max()
    all_idx = np.arange(lo, hi + 1)
    counts = np.zeros(all_idx.shape[0])
    offsets = idx - lo
    np.add.at(counts, offsets, 1.0)
    mids = (all_idx + 0.5) * b + c
    heights = counts / (w.shape[0] * b)
    return mids, heights


def _quartic_pilot(mids, heights, c, side_range) -> float:
    """McCrary's second-stage bandwidth for one side via a global quartic."""
    J = mids.shape[0]
    if J < 5 or side_range <= 0.0:
        return max(side_range, 0.0)
    x = mids - c
    design = np.column_stack([np.ones(J), x, x**2, x**3, x**4])
    coef, *_ = np.linalg.lstsq(design, heights, rcond=None)
    fitted = design @ coef
    rss = float(np.sum((heights - fitted) ** 2))
    dof = max(J - 5, 1)
    mse = rss / dof
    second_deriv = 2.0 * coef[2] + 6.0 * coef[3] * x + 12.0 * coef[4] * x**2
    curvature = float(np.sum(second_deriv**2))
    if curvature <= 0.0 or mse <= 0.0:
        return side_range
    h = _AUTO_H_CONSTANT * (mse * side_range / curvature) ** 0.2
    return min(h, side_range)


def _local_linear(x0: float, mids: np.ndarray, heights: np.ndarray, h: float, side: str) -> float:
    """Triangular-kernel local linear estimate of the density at x0."""
    u = (mids - x0) / h
    weights = np.clip(1.0 - np.abs(u), 0.0, None)
    usable = weights > 0.0
    if int(usable.sum()) < 2:
        raise EstimationError(f"fewer than 2 usable histogram bins on the {side} side")
    x = mids[usable] - x0
    y = heights[usable]
    sw = np.sqrt(weights[usable])
    design = np.column_stack([sw, sw * x])
    coef, *_ = np.linalg.lstsq(design, sw * y, rcond=None)
    return float(coef[0])


def mccrary_test(
    w_values,
    cutoff: float,
    bin_width: float | None = None,
    bandwidth: float | None = None,
) -> McCraryResult:
    """Test for a jump in the density of the running variable at the cutoff."""
    w = np.asarray(w_values, dtype=float).ravel()
    n = w.shape[0]
    n_left = int(np.sum(w < cutoff))
    n_right = n - n_left
    if n_left < MIN_PER_SIDE or n_right < MIN_PER_SIDE:
        raise EstimationError(
            f"need at least {MIN_PER_SIDE} observations on each side of the cutoff "
            f"(have {n_left} left, {n_right} right)"
        )

    if bin_width is None:
        sd = float(np.std(w, ddof=1))
        if sd <= 0.0:
            raise NumericError("running variable has zero variance")
        bin_width = 2.0 * sd * n ** (-0.5)
    elif bin_width <= 0.0:
        raise EstimationError("bin width must be positive")

    mids, heights = _histogram(w, cutoff, bin_width)
    left = mids < cutoff
    right = ~left
    if int(left.sum()) < 2 or int(right.sum()) < 2:
        raise EstimationError("fewer than 2 histogram bins on one side of the cutoff")

    if bandwidth is None:
        h_left = _quartic_pilot(mids[left], heights[left], cutoff, cutoff - mids[left].min())
        h_right = _quartic_pilot(mids[right], heights[right], cutoff, mids[right].max() - cutoff)
        bandwidth = 0.5 * (h_left + h_right)
        if bandwidth <= 0.0:
            raise NumericError("automatic bandwidth selection degenerated to zero")
    elif bandwidth <= 0.0:
        raise EstimationError("bandwidth must be positive")

    f_left = _local_linear(cutoff, mids[left], heights[left], bandwidth, "left")
    f_right = _local_linear(cutoff, mids[right], heights[right], bandwidth, "right")
    if f_left <= 0.0 or f_right <= 0.0:
        raise NumericError("degenerate density: nonpositive boundary estimate")

    theta = math.log(f_right) - math.log(f_left)
    std_error = math.sqrt((24.0 / 5.0) * (1.0 / f_right + 1.0 / f_left) / (n * bandwidth))
    z = theta / std_error
    curve = _smoothed_curve(mids, heights, left, right, cutoff, bandwidth)
    return McCraryResult(
        theta=theta,
        std_error=std_error,
        z=z,
        p_value=two_sided_normal_p(z),
        bin_width=bin_width,
        bandwidth=bandwidth,
        f_left=f_left,
        f_right=f_right,
        n=n,
        n_left=n_left,
        n_right=n_right,
        curve=curve,
    )


def _smoothed_curve(mids, heights, left, right, cutoff, bandwidth):
    curve: list[tuple[float, float, str]] = []
    for mask, side in ((left, "left"), (right, "right")):
        side_mids = mids[mask]
        side_heights = heights[mask]
        if side == "left":
            grid = np.linspace(side_mids.min(), cutoff, CURVE_POINTS_PER_SIDE)
        else:
            grid = np.linspace(cutoff, side_mids.max(), CURVE_POINTS_PER_SIDE)
        for x0 in grid:
            value = _local_linear(float(x0), side_mids, side_heights, bandwidth, side)
            curve.append((float(x0), max(value, 0.0), side))
    return curve


def density_curve_export(result: McCraryResult) -> list[tuple[float, float, str]]:
    """Plot-ready (grid point, smoothed density, side) rows."""
    return list(result.curve)
