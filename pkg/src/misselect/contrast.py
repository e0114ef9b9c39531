"""Covariance contrast estimation.

The plug-in matrices are A = X' Sigma(X beta) X (negative expected
working-model Hessian) and B = X' diag(r*r) X (outer-product score
covariance).  All criteria consume only tr(A^{-1}B) and log|A^{-1}B|,
which are computed from generalized eigenvalues after Cholesky whitening
rather than by forming the nonsymmetric product A^{-1}B.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DegenerateContrastError, NotPositiveDefiniteError, ShapeError
from .families import Family, mean, variance
from .qmle import best_misspecified_params

EIG_FLOOR_REL = 1e-12
SYMMETRY_ATOL = 1e-8


@dataclass
class ContrastEstimate:
    """Contrast summary: eigenvalues of A^{-1}B plus derived scalars."""

    a_hat: np.ndarray
    b_hat: np.ndarray
    gen_eigs: np.ndarray  # ascending
    trace_h: float
    logdet_h: float


def _symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def _check_pair(family: Family, X: np.ndarray, beta_hat: np.ndarray):
    X = np.asarray(X, dtype=float)
    beta_hat = np.asarray(beta_hat, dtype=float)
    if X.ndim != 2:
        raise ShapeError(f"design must be a matrix, got ndim={X.ndim}")
    if beta_hat.shape != (X.shape[1],):
        raise ShapeError(f"beta has shape {beta_hat.shape}, expected ({X.shape[1]},)")
    return X, beta_hat


def estimate_A(family: Family, X: np.ndarray, beta_hat: np.ndarray) -> np.ndarray:
    """Plug-in A = X' diag(b''(X beta)) X with floored variances."""
    X, beta_hat = _check_pair(family, X, beta_hat)
    w = variance(family, X @ beta_hat)
    return _symmetrize((X * w[:, None]).T @ X)


def estimate_B(family: Family, X: np.ndarray, y: np.ndarray, beta_hat: np.ndarray) -> np.ndarray:
    """Plug-in B = X' diag(r*r) X with r = y - mu(X beta); PSD by construction."""
    X, beta_hat = _check_pair(family, X, beta_hat)
    y = np.asarray(y, dtype=float)
    if y.shape != (X.shape[0],):
        raise ShapeError(f"response has shape {y.shape}, expected ({X.shape[0]},)")
    r = y - mean(family, X @ beta_hat)
    return _symmetrize((X * (r * r)[:, None]).T @ X)


def contrast(a_hat: np.ndarray, b_hat: np.ndarray) -> ContrastEstimate:
    """Generalized eigenvalues of (b_hat, a_hat) via Cholesky whitening.

    Raises NotPositiveDefiniteError when a_hat has no Cholesky factor and
    DegenerateContrastError when an eigenvalue falls at or below the
    unit-invariant floor (near-perfect fit; the caller should mark
    generalized criteria unavailable for that model).
    """
    a_hat = np.asarray(a_hat, dtype=float)
    b_hat = np.asarray(b_hat, dtype=float)
    if a_hat.ndim != 2 or a_hat.shape[0] != a_hat.shape[1]:
        raise ShapeError("a_hat must be square")
    if b_hat.shape != a_hat.shape:
        raise ShapeError("a_hat and b_hat must have identical shape")
    scale_a = max(np.max(np.abs(a_hat)), 1.0)
    scale_b = max(np.max(np.abs(b_hat)), 1.0)
    if np.max(np.abs(a_hat - a_hat.T)) > SYMMETRY_ATOL * scale_a:
        raise ValueError("a_hat is not symmetric")
    if np.max(np.abs(b_hat - b_hat.T)) > SYMMETRY_ATOL * scale_b:
        raise ValueError("b_hat is not symmetric")
    a_hat = _symmetrize(a_hat)
    b_hat = _symmetrize(b_hat)

    try:
        L = np.linalg.cholesky(a_hat)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("a_hat is not positive definite") from None

    # Whitened problem: eigenvalues of L^{-1} b L^{-T} equal those of A^{-1}B.
    M = scipy.linalg.solve_triangular(L, b_hat, lower=True)
    M = scipy.linalg.solve_triangular(L, M.T, lower=True)
    eigs = np.linalg.eigvalsh(_symmetrize(M))

    floor = EIG_FLOOR_REL * max(float(eigs[-1]), 1.0)
    if eigs[0] <= floor:
        raise DegenerateContrastError(
            f"smallest generalized eigenvalue {eigs[0]:.3e} at or below floor {floor:.3e}"
        )
    return ContrastEstimate(
        a_hat=a_hat,
        b_hat=b_hat,
        gen_eigs=eigs,
        trace_h=float(np.sum(eigs)),
        logdet_h=float(np.sum(np.log(eigs))),
    )


def true_contrast(family: Family, X: np.ndarray, Ey: np.ndarray,
                  var_y: np.ndarray) -> ContrastEstimate:
    """Population contrast at the best misspecified parameter vector.

    Used by diagnostics and acceptance tests; requires the truth
    (EY and var Y) to be known.
    """
    X = np.asarray(X, dtype=float)
    Ey = np.asarray(Ey, dtype=float)
    var_y = np.asarray(var_y, dtype=float)
    if np.ndim(var_y) == 0:
        var_y = np.full(X.shape[0], float(var_y))
    if var_y.shape != (X.shape[0],):
        raise ShapeError(f"var_y has shape {var_y.shape}, expected ({X.shape[0]},)")
    if not np.all(var_y > 0):
        raise ValueError("var_y must be entrywise positive")

    beta0 = best_misspecified_params(family, Ey, X)
    A = estimate_A(family, X, beta0)
    B = _symmetrize((X * var_y[:, None]).T @ X)
    return contrast(A, B)
