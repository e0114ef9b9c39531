"""Quasi-maximum-likelihood fitting via Newton/IRLS with step-halving.

``fit`` solves the score equation X'[y - mu(X beta)] = 0 for an observed
response; ``best_misspecified_params`` solves the population normal
equation X'[EY - mu(X beta)] = 0, which yields the KL-closest parameter
vector of the working family.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, DivergenceError, ShapeError, SingularDesignError
from .families import Family, mean, quasi_log_likelihood, variance

SCORE_TOL = 1e-8
MAX_ITER = 100
MAX_HALVINGS = 30

# A Cholesky pivot at or below this fraction of the largest diagonal entry
# marks the weighted normal matrix as rank deficient.
RANK_TOL = 1e-12


@dataclass
class FittedModel:
    """A quasi-MLE on one support, with solver diagnostics.

    ``support`` holds 0-based column indices into the full design;
    ``loglik`` uses the constant-dropped convention; ``loglik_trace``
    records the quasi-log-likelihood at each accepted iterate.
    """

    support: tuple[int, ...]
    beta_hat: np.ndarray
    loglik: float
    score_inf_norm: float
    iterations: int
    converged: bool
    loglik_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def size(self) -> int:
        return len(self.support)


def _check_design(y: np.ndarray, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ShapeError(f"design must be a matrix, got ndim={X.ndim}")
    n, d = X.shape
    if d < 1:
        raise ShapeError("design must have at least one column")
    if n < d:
        raise ShapeError(f"need n >= d, got n={n}, d={d}")
    if y.shape != (n,):
        raise ShapeError(f"response has shape {y.shape}, expected ({n},)")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
        raise ValueError("inputs must be finite")
    return y, X


def _cholesky_spd(A: np.ndarray):
    """Lower Cholesky factor of A, or None if A is numerically rank deficient."""
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        return None
    piv = np.diag(L) ** 2
    if piv.min() <= RANK_TOL * np.max(np.diag(A)):
        return None
    return L


def _newton_solve(family: Family, y: np.ndarray, X: np.ndarray, score_tol: float,
                  max_iter: int = MAX_ITER):
    """Shared Newton/IRLS core.

    Returns (beta, score_inf, iterations, converged, loglik_trace).
    """
    n, d = X.shape
    tol = score_tol * (1.0 + np.max(np.abs(X.T @ y)))
    cap = family.theta_cap

    beta = np.zeros(d)
    theta = np.zeros(n)
    loglik = quasi_log_likelihood(family, y, X, beta)
    trace = [loglik]

    score = X.T @ (y - mean(family, theta))
    score_inf = float(np.max(np.abs(score)))
    iterations = 0
    converged = score_inf <= tol

    while not converged and iterations < max_iter:
        w = variance(family, theta)
        A = (X * w[:, None]).T @ X
        L = _cholesky_spd(A)
        if L is None:
            raise SingularDesignError(
                f"weighted normal matrix is rank deficient at iteration {iterations}"
            )
        delta = scipy.linalg.cho_solve((L, True), score)

        # Step limiting mirrors a bounded linear-predictor region: a single
        # step may move X beta by at most theta_cap in sup-norm.
        step_sup = float(np.max(np.abs(X @ delta)))
        if step_sup > cap:
            delta *= cap / step_sup

        # Halve until the quasi-log-likelihood does not decrease.
        t = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            beta_new = beta + t * delta
            new_loglik = quasi_log_likelihood(family, y, X, beta_new)
            if new_loglik >= loglik:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break  # stalled line search; report non-convergence

        beta = beta_new
        theta = X @ beta
        loglik = new_loglik
        trace.append(loglik)
        iterations += 1

        if np.max(np.abs(theta)) > 10.0 * cap:
            raise DivergenceError(
                "linear predictor exceeded 10 * theta_cap; "
                "response is likely separable under this working model",
                last_beta=beta,
            )

        score = X.T @ (y - mean(family, theta))
        score_inf = float(np.max(np.abs(score)))
        converged = score_inf <= tol

    return beta, score_inf, iterations, converged, np.asarray(trace)


def fit(family: Family, y: np.ndarray, X: np.ndarray,
        support: tuple[int, ...] | None = None,
        score_tol: float = SCORE_TOL, max_iter: int = MAX_ITER) -> FittedModel:
    """Fit the quasi-MLE on the given design.

    ``support`` is metadata only: the indices the columns of ``X`` carry in
    the full design (defaults to 0..d-1).  For the gaussian family the
    result coincides with the least-squares solution.
    """
    y, X = _check_design(y, X)
    d = X.shape[1]
    if support is None:
        support = tuple(range(d))
    else:
        support = tuple(int(j) for j in support)
        if len(support) != d:
            raise ShapeError(f"support has {len(support)} entries for a {d}-column design")

    beta, score_inf, iters, converged, trace = _newton_solve(family, y, X, score_tol, max_iter)
    loglik = quasi_log_likelihood(family, y, X, beta)
    return FittedModel(
        support=support,
        beta_hat=beta,
        loglik=loglik,
        score_inf_norm=score_inf,
        iterations=iters,
        converged=converged,
        loglik_trace=trace,
    )


def best_misspecified_params(family: Family, Ey: np.ndarray, X: np.ndarray,
                             score_tol: float = 1e-10) -> np.ndarray:
    """Solve the population normal equation X'[EY - mu(X beta)] = 0.

    Treats ``Ey`` as a noiseless response and reuses the Newton machinery
    at a tighter tolerance.  ``Ey`` must lie strictly inside the mean range
    of the family (in (0,1) for bernoulli, positive for poisson).
    """
    Ey, X = _check_design(Ey, X)
    if family.kind == "bernoulli" and not np.all((Ey > 0.0) & (Ey < 1.0)):
        raise ValueError("Ey must lie strictly in (0, 1) for the bernoulli family")
    if family.kind == "poisson" and not np.all(Ey > 0.0):
        raise ValueError("Ey must be positive for the poisson family")

    beta, score_inf, _, converged, _ = _newton_solve(family, Ey, X, score_tol)
    if not converged:
        raise ConvergenceError(
            f"population normal equation solve stopped at score norm {score_inf:.3e}"
        )
    return beta
