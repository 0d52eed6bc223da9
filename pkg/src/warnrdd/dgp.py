"""Synthetic fuzzy-discontinuity data with a known treatment effect.

The generator is the verification oracle for the whole pipeline: the
true effect is constant by default, so the local estimand equals the
configured value exactly.  Randomness comes from numpy's default_rng
(PCG64), a named, seedable, portable generator.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InputError
from .treatment import AnalysisRow, W_DECIMALS

GENERATOR_NAME = "numpy default_rng (PCG64)"


@dataclass
class DgpSpec:
    n: int
    cutoff: float = 0.4
    true_late: float = 5.0
    baseline: tuple[float, ...] = (10.0, 2.0)  # polynomial in W, ascending powers
    compliance: tuple[float, float] = (0.9, 0.1)  # (P(T=1|Z=1), P(T=1|Z=0))
    noise_sd: float = 1.0
    w_distribution: tuple = ("uniform",)  # or ("beta", a, b)
    manipulation: float = 0.0  # fraction of mass reflected across the cutoff
    manipulation_width: float = 0.05
    effect_slope: float = 0.0  # heterogeneity: effect = true_late + slope * (W - cutoff)
    covariate_noise_sd: float = 50.0
    seed: int = 0

    def validate(self) -> None:
        if self.n < 1:
            raise InputError("n must be positive")
        if not 0.0 < self.cutoff < 1.0:
            raise InputError(f"cutoff {self.cutoff} outside (0, 1)")
        p_below, p_above = self.compliance
        if not 0.0 <= p_above < p_below <= 1.0:
            raise InputError(
                "compliance must satisfy 0 <= P(T|Z=0) < P(T|Z=1) <= 1 "
                "(treatment probability has to jump upward at the cutoff)"
            )
        if self.noise_sd < 0.0:
            raise InputError("noise_sd must be >= 0")
        if not 0.0 <= self.manipulation < 0.5:
            raise InputError("manipulation fraction must lie in [0, 0.5)")
        if self.manipulation_width <= 0.0 or self.manipulation_width >= min(
            self.cutoff, 1.0 - self.cutoff
        ):
            raise InputError("manipulation_width must fit inside (0, 1) around the cutoff")
        kind = self.w_distribution[0]
        if kind == "uniform":
            pass
        elif kind == "beta":
            if len(self.w_distribution) != 3 or min(self.w_distribution[1:]) <= 0:
                raise InputError("beta distribution needs two positive shape parameters")
        else:
            raise InputError(f"unknown w_distribution {kind!r}")
        if not self.baseline:
            raise InputError("baseline polynomial needs at least one coefficient")


def _draw_running_variable(spec: DgpSpec, rng: np.random.Generator) -> np.ndarray:
    kind = spec.w_distribution[0]
    if kind == "uniform":
        w = rng.random(spec.n)
    else:
        w = rng.beta(spec.w_distribution[1], spec.w_distribution[2], size=spec.n)
    if spec.manipulation > 0.0:
        c, width = spec.cutoff, spec.manipulation_width
        band = (w > c) & (w <= c + width)
        move = band & (rng.random(spec.n) < spec.manipulation)
        w = np.where(move, 2.0 * c - w, w)
    w = np.round(w, W_DECIMALS)
    return np.clip(w, 1e-12, 1.0 - 1e-12)


def generate(spec: DgpSpec) -> list[AnalysisRow]:
    """Deterministic synthetic dataset for the given spec and seed."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    w = _draw_running_variable(spec, rng)
    z = (w <= spec.cutoff).astype(int)
    p_below, p_above = spec.compliance
    p_treat = np.where(z == 1, p_below, p_above)
    t = (rng.random(spec.n) < p_treat).astype(int)
    baseline = np.polynomial.polynomial.polyval(w, np.asarray(spec.baseline, dtype=float))
    effect = spec.true_late + spec.effect_slope * (w - spec.cutoff)
    y = baseline + effect * t
    if spec.noise_sd > 0.0:
        y = y + spec.noise_sd * rng.standard_normal(spec.n)
    # covariate on the online-test scale, correlated with the running variable
    x = 1000.0 * w + spec.covariate_noise_sd * rng.standard_normal(spec.n)
    width = len(str(spec.n))
    return [
        AnalysisRow(
            student_id=f"sim{i:0{width}d}",
            w=float(w[i]),
            z=int(z[i]),
            t=int(t[i]),
            y=float(y[i]),
            x=(float(x[i]),),
            attended=True,
        )
        for i in range(spec.n)
    ]


def true_late(spec: DgpSpec) -> float:
    """The estimand at the cutoff; equals the constant effect by construction."""
    return float(spec.true_late)


def load_spec(path) -> DgpSpec:
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    if "n" not in payload:
        raise InputError(f"dgp spec {path}: missing required key 'n'")
    known = {name for name in DgpSpec.__dataclass_fields__}
    unknown = sorted(set(payload) - known)
    if unknown:
        raise InputError(f"dgp spec {path}: unknown key(s) {', '.join(unknown)}")
    for name in ("baseline", "compliance", "w_distribution"):
        if name in payload:
            payload[name] = tuple(payload[name])
    spec = DgpSpec(**payload)
    spec.validate()
    return spec


def write_truth(spec: DgpSpec, path) -> None:
    """Sidecar with the true effect and a spec echo for acceptance scripts."""
    payload = {
        "true_late": true_late(spec),
        "generator": GENERATOR_NAME,
        "seed": spec.seed,
        "spec": asdict(spec),
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
