"""Canonical-link exponential-family working models.

Each family is defined through its cumulant function ``b`` and the
derivatives ``b'`` (mean) and ``b''`` (variance).  The quasi-log-likelihood
uses the constant-dropped convention

    l(y, beta) = y' X beta - sum_i b((X beta)_i),

so reported values differ from full log-densities by a model-independent
constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ShapeError

FAMILY_KINDS = ("gaussian", "bernoulli", "poisson")

# Floor for b'' inside solver weights and A-matrix assembly; logistic and
# Poisson curvatures vanish at extreme linear predictors and would make
# the IRLS weight matrix singular.
VARIANCE_FLOOR = 1e-10

# Default cap on the natural parameter, used by solvers for step limiting
# only; never alters reported likelihood values.
DEFAULT_THETA_CAP = 30.0


@dataclass(frozen=True)
class Family:
    """An exponential-family working model with canonical link.

    theta_cap bounds how far a single solver step may move the linear
    predictor; it plays no role in likelihood evaluation.
    """

    kind: str
    theta_cap: float = DEFAULT_THETA_CAP

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}; expected one of {FAMILY_KINDS}")
        if not (self.theta_cap > 0):
            raise ValueError("theta_cap must be positive")


GAUSSIAN = Family("gaussian")
BERNOULLI = Family("bernoulli")
POISSON = Family("poisson")


def _check_finite(theta) -> np.ndarray:
    arr = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("theta must be finite")
    return arr


def _maybe_scalar(value: np.ndarray, scalar_in: bool):
    return float(value) if scalar_in else value


def cumulant(family: Family, theta):
    """Evaluate b(theta) elementwise.

    gaussian: theta^2/2; bernoulli: log(1 + e^theta) in overflow-safe
    form; poisson: e^theta.
    """
    scalar = np.isscalar(theta) or np.ndim(theta) == 0
    t = _check_finite(theta)
    if family.kind == "gaussian":
        out = 0.5 * t * t
    elif family.kind == "bernoulli":
        # log(1 + e^t) = log1p(e^{-|t|}) + max(t, 0), stable for large |t|
        out = np.log1p(np.exp(-np.abs(t))) + np.maximum(t, 0.0)
    else:
        out = np.exp(t)
    return _maybe_scalar(out, scalar)


def mean(family: Family, theta):
    """Evaluate the mean function b'(theta) elementwise."""
    scalar = np.isscalar(theta) or np.ndim(theta) == 0
    t = _check_finite(theta)
    if family.kind == "gaussian":
        out = t.copy() if isinstance(t, np.ndarray) else t
    elif family.kind == "bernoulli":
        out = expit(t)
    else:
        out = np.exp(t)
    return _maybe_scalar(out, scalar)


def variance(family: Family, theta):
    """Evaluate max(b''(theta), VARIANCE_FLOOR) elementwise.

    The floor keeps IRLS weight matrices invertible where the raw
    curvature underflows (saturated logistic, extreme Poisson).
    """
    scalar = np.isscalar(theta) or np.ndim(theta) == 0
    t = _check_finite(theta)
    if family.kind == "gaussian":
        out = np.ones_like(t)
    elif family.kind == "bernoulli":
        p = expit(t)
        out = p * (1.0 - p)
    else:
        out = np.exp(t)
    out = np.maximum(out, VARIANCE_FLOOR)
    return _maybe_scalar(out, scalar)


def quasi_log_likelihood(family: Family, y: np.ndarray, X: np.ndarray, beta: np.ndarray) -> float:
    """Constant-dropped quasi-log-likelihood y'X beta - 1'b(X beta)."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if X.ndim != 2:
        raise ShapeError(f"design must be a matrix, got ndim={X.ndim}")
    n, d = X.shape
    if y.shape != (n,):
        raise ShapeError(f"response has shape {y.shape}, expected ({n},)")
    if beta.shape != (d,):
        raise ShapeError(f"beta has shape {beta.shape}, expected ({d},)")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X)) and np.all(np.isfinite(beta))):
        raise ValueError("inputs must be finite")
    theta = X @ beta
    return float(y @ theta - np.sum(cumulant(family, theta)))
