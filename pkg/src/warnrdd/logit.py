"""Logistic regression for the pass-probability model.

Fitting is maximum likelihood via iteratively reweighted least squares
with step-halving, so the log-likelihood never decreases across
iterations.  The predicted probability of passing is the running
variable of the discontinuity analysis downstream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InputError, SeparationError

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100
SEPARATION_NORM = 1e4  # bounded features keep honest coefficients far below this


@dataclass
class LogitModel:
    coefficients: np.ndarray  # intercept first
    feature_names: list[str]
    converged: bool
    n_train: int
    log_likelihood: float
    n_iter: int = 0

    @property
    def n_features(self) -> int:
        return len(self.coefficients) - 1


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    expo = np.exp(eta[~pos])
    out[~pos] = expo / (1.0 + expo)
    return out


def log_likelihood(beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    eta = X @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def score_vector(beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of the log-likelihood at beta."""
    return X.T @ (y - _sigmoid(X @ beta))


def _design(features) -> np.ndarray:
    X = np.atleast_2d(np.asarray(features, dtype=float))
    return np.column_stack([np.ones(X.shape[0]), X])


def fit_logit(
    features,
    passed,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    feature_names: list[str] | None = None,
) -> LogitModel:
    """Maximum-likelihood logit fit.

    Raises InputError when the outcome is single-class and
    SeparationError (with the diverging partial fit attached) when
    coefficients run away, which signals quasi-separation.
    """
    X = _design(features)
    y = np.asarray(passed, dtype=float).ravel()
    n, k = X.shape
    if n < 2:
        raise InputError("logit fit needs at least 2 rows")
    if y.shape[0] != n:
        raise InputError("feature rows and outcomes differ in length")
    if not np.isin(y, (0.0, 1.0)).all():
        raise InputError("outcomes must be 0/1")
    if y.min() == y.max():
        raise InputError("degenerate outcome: only one class present")
    if feature_names is None:
        feature_names = [f"x{i}" for i in range(1, k)]
    if len(feature_names) != k - 1:
        raise InputError("feature_names length does not match feature count")

    beta = np.zeros(k)
    beta[0] = np.log(y.mean() / (1.0 - y.mean()))
    ll = log_likelihood(beta, X, y)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        p = _sigmoid(X @ beta)
        w = np.clip(p * (1.0 - p), 1e-10, None)
        hessian = X.T @ (X * w[:, None])
        try:
            delta = np.linalg.solve(hessian, X.T @ (y - p))
        except np.linalg.LinAlgError:
            raise SeparationError(
                "quasi-separation: singular weighted design",
                partial_fit=LogitModel(beta, feature_names, False, n, ll, iterations),
            ) from None
        step = 1.0
        candidate = beta + delta
        ll_new = log_likelihood(candidate, X, y)
        while ll_new < ll - 1e-12 and step > 1e-8:
            step *= 0.5
            candidate = beta + step * delta
            ll_new = log_likelihood(candidate, X, y)
        if np.max(np.abs(candidate)) > SEPARATION_NORM:
            raise SeparationError(
                "quasi-separation: coefficients diverging",
                partial_fit=LogitModel(candidate, feature_names, False, n, ll_new, iterations),
            )
        # perfect separation: the likelihood saturates while coefficients drift off
        if np.max(np.abs(y - _sigmoid(X @ candidate))) < 1e-6:
            raise SeparationError(
                "perfect separation: fitted probabilities reached the observed outcomes",
                partial_fit=LogitModel(candidate, feature_names, False, n, ll_new, iterations),
            )
        change = float(np.max(np.abs(candidate - beta)))
        beta, ll = candidate, ll_new
        if change < tol:
            converged = True
            break
    return LogitModel(beta, list(feature_names), converged, n, ll, iterations)


def predict_pass_probability(model: LogitModel, features) -> float:
    """logistic(intercept + coefficients . features), strictly inside (0, 1)."""
    x = np.asarray(features, dtype=float).ravel()
    if x.shape[0] != model.n_features:
        raise InputError(
            f"expected {model.n_features} features, got {x.shape[0]}"
        )
    eta = float(model.coefficients[0] + model.coefficients[1:] @ x)
    p = float(_sigmoid(np.array([eta]))[0])
    return min(max(p, 1e-12), 1.0 - 1e-12)


def save_model(model: LogitModel, path) -> None:
    payload = {
        "feature_names": model.feature_names,
        "coefficients": [float(c) for c in model.coefficients],
        "converged": model.converged,
        "n_train": model.n_train,
        "log_likelihood": model.log_likelihood,
        "n_iter": model.n_iter,
    }
    with open(path, "w", encoding="utf-8") as handle:
        # json renders floats with repr, which round-trips bit-exactly
        json.dump(payload, handle, indent=2)
        handle.write("\n")


def load_model(path) -> LogitModel:
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    try:
        return LogitModel(
            coefficients=np.asarray(payload["coefficients"], dtype=float),
            feature_names=list(payload["feature_names"]),
            converged=bool(payload["converged"]),
            n_train=int(payload["n_train"]),
            log_likelihood=float(payload["log_likelihood"]),
            n_iter=int(payload.get("n_iter", 0)),
        )
    except KeyError as missing:
        raise InputError(f"model file {path}: missing key {missing}") from None
