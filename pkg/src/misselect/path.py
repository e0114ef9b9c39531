"""Candidate-model generation: marginal screening plus a penalized path.

``sis_screen`` prefilters columns by the marginal statistic
|x~' (y - ybar)| with x~ the standardized column; the threshold comes
either from a fixed count or from random permutations of the response.
``sica_path`` and ``lasso_path`` then trace a penalized solution path on
the screened design and collect the distinct supports, which
``refit_and_score`` turns into unpenalized QMLE fits with criterion
scores.

The path objective is -(1/n) l(y, beta) + sum_j p(|beta_j|; lam).  SICA
uses p(t) = lam (a+1) t / (a+t); each local-linear-approximation round
solves a weighted L1 problem by coordinate descent on the current IRLS
quadratic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .contrast import ContrastEstimate, contrast, estimate_A, estimate_B
from .criteria import CriterionScores, score_model
from .errors import MisselectError, ShapeError
from .families import Family, mean, quasi_log_likelihood, variance
from .qmle import FittedModel, fit

# Columns whose centered norm falls below this are treated as constant.
_CONST_COL_TOL = 1e-10

# Gram-matrix coordinate descent pays off while q^2 stays small.
_GRAM_LIMIT = 1024


@dataclass(frozen=True)
class ScreenConfig:
    """Marginal screening setup.

    mode "fixed_count" keeps the top ``k`` columns (``k=None`` resolves to
    min(n-1, p) at screening time); mode "permutation" keeps columns whose
    statistic exceeds the ``quantile`` of the maxima over ``n_perms``
    random permutations of the response.
    """

    mode: str = "fixed_count"
    k: int | None = None
    n_perms: int = 10
    quantile: float = 1.0

    def __post_init__(self):
        if self.mode not in ("fixed_count", "permutation"):
            raise ValueError(f"unknown screening mode {self.mode!r}")
        if self.mode == "fixed_count" and self.k is not None and self.k < 1:
            raise ValueError("fixed_count screening requires k >= 1")
        if self.mode == "permutation":
            if self.n_perms < 1:
                raise ValueError("permutation screening requires n_perms >= 1")
            if not (0.0 <= self.quantile <= 1.0):
                raise ValueError("quantile must lie in [0, 1]")


@dataclass(frozen=True)
class PathConfig:
    """Regularization-path setup shared by the SICA and lasso penalties."""

    penalty: str = "sica"
    a: float = 0.5
    n_lambda: int = 100
    lambda_min_ratio: float = 0.01
    n_lla: int = 3
    coord_tol: float = 1e-7
    max_sweeps: int = 200
    max_support: int | None = None

    def __post_init__(self):
        if self.penalty not in ("sica", "lasso"):
            raise ValueError(f"unknown penalty {self.penalty!r}")
        if self.penalty == "sica" and not self.a > 0:
            raise ValueError("SICA shape parameter a must be positive")
        if self.n_lambda < 2:
            raise ValueError("n_lambda must be at least 2")
        if not (0.0 < self.lambda_min_ratio <= 1.0):
            raise ValueError("lambda_min_ratio must lie in (0, 1]")


@dataclass
class CandidatePath:
    """Distinct supports along a path, ordered by first appearance."""

    supports: list[tuple[int, ...]]
    lambda_grid: np.ndarray
    screen_set: tuple[int, ...]


def sis_screen(family: Family, y: np.ndarray, X: np.ndarray, config: ScreenConfig,
               rng: np.random.Generator | int | None = None) -> list[int]:
    """Return the indices retained by marginal screening, ascending.

    Constant columns are excluded with a warning.  ``rng`` seeds the
    permutation draws (ignored in fixed_count mode).
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ShapeError("y and X do not conform")
    n, p = X.shape
    if p < 1:
        raise ShapeError("design must have at least one column")

    xc = X - X.mean(axis=0)
    norms = np.sqrt(np.einsum("ij,ij->j", xc, xc))
    col_scale = np.maximum(1.0, np.max(np.abs(X), axis=0, initial=0.0))
    valid = norms > _CONST_COL_TOL * np.sqrt(n) * col_scale
    if not np.all(valid):
        warnings.warn(
            f"excluded {int(np.sum(~valid))} constant column(s) from screening",
            stacklevel=2,
        )
    if not np.any(valid):
        return []

    yc = y - y.mean()
    stats = np.zeros(p)
    stats[valid] = np.abs(xc[:, valid].T @ yc) / norms[valid]

    if config.mode == "fixed_count":
        k = config.k if config.k is not None else min(n - 1, p)
        if k > p:
            raise ValueError(f"fixed_count k={k} exceeds p={p}")
        order = np.argsort(-stats, kind="stable")
        order = [j for j in order if valid[j]]
        keep = order[:k]
        return sorted(int(j) for j in keep)

    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    xn = xc[:, valid] / norms[valid]
    maxima = np.empty(config.n_perms)
    for k in range(config.n_perms):
        perm = rng.permutation(n)
        maxima[k] = np.max(np.abs(xn.T @ yc[perm]))
    threshold = float(np.quantile(maxima, config.quantile))
    keep = np.flatnonzero(valid & (stats > threshold))
    return [int(j) for j in keep]


def _sica_weights(beta_abs: np.ndarray, lam: float, a: float) -> np.ndarray:
    # derivative of lam (a+1) t / (a+t) at t = |beta|
    return lam * (a + 1.0) * a / (a + beta_abs) ** 2


def _maybe_njit(fn):
    try:
        from numba import njit
    except ImportError:
        return fn
    return njit(cache=True)(fn)


@_maybe_njit
def _sweep_gram(G, c, u, beta, w, d, coords):
    """One CD pass in Gram form; G is symmetric, u tracks G @ beta."""
    max_delta = 0.0
    q = u.shape[0]
    for idx in range(coords.shape[0]):
        j = coords[idx]
        dj = d[j]
        if dj <= 0.0:
            continue
        bj = beta[j]
        g = c[j] - u[j] + dj * bj
        wj = w[j]
        if g > wj:
            new = (g - wj) / dj
        elif g < -wj:
            new = (g + wj) / dj
        else:
            new = 0.0
        if new != bj:
            delta = new - bj
            for t in range(q):
                u[t] += G[j, t] * delta
            beta[j] = new
            change = abs(delta)
            if change > max_delta:
                max_delta = change
    return max_delta


@_maybe_njit
def _sweep_resid(XsT, v, wres, beta, w, d, n, coords):
    """One CD pass in residual form; wres tracks v * (z - Xs beta)."""
    max_delta = 0.0
    for idx in range(coords.shape[0]):
        j = coords[idx]
        dj = d[j]
        if dj <= 0.0:
            continue
        bj = beta[j]
        acc = 0.0
        for t in range(n):
            acc += XsT[j, t] * wres[t]
        g = acc / n + dj * bj
        wj = w[j]
        if g > wj:
            new = (g - wj) / dj
        elif g < -wj:
            new = (g + wj) / dj
        else:
            new = 0.0
        if new != bj:
            delta = new - bj
            for t in range(n):
                wres[t] -= v[t] * XsT[j, t] * delta
            beta[j] = new
            change = abs(delta)
            if change > max_delta:
                max_delta = change
    return max_delta


class _QuadraticState:
    """IRLS quadratic model of -(1/n) l around the current iterate.

    Holds whatever the coordinate updates need: per-coordinate curvatures
    ``d``, and either a Gram matrix with linear term (small q) or weighted
    residuals (large q).
    """

    def __init__(self, Xs: np.ndarray, use_gram: bool):
        self.Xs = Xs
        self.XsT = np.ascontiguousarray(Xs.T)
        self.n, self.q = Xs.shape
        self.use_gram = use_gram
        self.gram_cache: np.ndarray | None = None  # unweighted Gram, gaussian reuse

    def refresh(self, family: Family, y: np.ndarray, beta: np.ndarray) -> None:
        Xs, n = self.Xs, self.n
        theta = Xs @ beta
        if family.kind == "gaussian":
            v = None
            score_res = y - theta
        else:
            v = variance(family, theta)
            score_res = y - mean(family, theta)
        if self.use_gram:
            if family.kind == "gaussian":
                if self.gram_cache is None:
                    self.gram_cache = Xs.T @ Xs / n
                self.G = self.gram_cache
            else:
                self.G = (Xs * v[:, None]).T @ Xs / n
            self.d = np.ascontiguousarray(np.diag(self.G))
            # linear term of the quadratic: (1/n) Xs' (v*z) with
            # v*z = v*theta + (y - mu); for gaussian v = 1, z = y
            self.c = self.G @ beta + Xs.T @ score_res / n
            self.u = self.G @ beta  # running G beta
        else:
            self.v = np.ones(n) if v is None else v
            if family.kind == "gaussian":
                self.d = np.einsum("ij,ij->j", Xs, Xs) / n
            else:
                self.d = (Xs * Xs).T @ self.v / n
            # weighted working residual v*(z - Xs beta) = y - mu
            self.wres = score_res.copy()

    def sweep(self, beta: np.ndarray, w: np.ndarray, coords: np.ndarray) -> float:
        if self.use_gram:
            return _sweep_gram(self.G, self.c, self.u, beta, w, self.d, coords)
        return _sweep_resid(self.XsT, self.v, self.wres, beta, w, self.d, self.n, coords)


def _solve_one_lambda(family: Family, y: np.ndarray, state: _QuadraticState,
                      beta: np.ndarray, lam: float, cfg: PathConfig) -> bool:
    """LLA rounds at a single penalty level; beta is updated in place.

    Returns True when converged within the sweep budget.  The budget is
    counted in full-pass equivalents: an active-set pass over k of q
    coordinates consumes k/q of one sweep.
    """
    q = beta.shape[0]
    all_coords = np.arange(q)
    sweeps_left = float(cfg.max_sweeps)
    gaussian = family.kind == "gaussian"

    for _ in range(cfg.n_lla if cfg.penalty == "sica" else 1):
        if cfg.penalty == "sica":
            w = _sica_weights(np.abs(beta), lam, cfg.a)
        else:
            w = np.full(q, lam)
        beta_round = beta.copy()

        # inner weighted-L1 solve, re-quadraticizing for non-gaussian families
        while True:
            state.refresh(family, y, beta)
            beta_quad = beta.copy()
            inner_done = False
            while sweeps_left > 0:
                sweeps_left -= 1.0
                delta = _cd_sweep(state, beta, w, all_coords)
                if delta < cfg.coord_tol:
                    inner_done = True
                    break
                # iterate on the active set before the next full pass
                while sweeps_left > 0:
                    active = np.flatnonzero(beta)
                    if active.size == 0:
                        break
                    sweeps_left -= active.size / q
                    if _cd_sweep(state, beta, w, active) < cfg.coord_tol:
                        break
            if not inner_done and sweeps_left <= 0:
                return False
            if gaussian or np.max(np.abs(beta - beta_quad), initial=0.0) < cfg.coord_tol:
                break
            if sweeps_left <= 0:
                return False

        if np.max(np.abs(beta - beta_round), initial=0.0) < cfg.coord_tol:
            break
    return True


def _trace_path(family: Family, y: np.ndarray, X: np.ndarray, cfg: PathConfig,
                screen_set: tuple[int, ...] | None,
                lambda_grid: np.ndarray | None) -> CandidatePath:
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ShapeError("y and X do not conform")
    n, q = X.shape
    if screen_set is None:
        screen_set = tuple(range(q))
    else:
        screen_set = tuple(int(j) for j in screen_set)
        if len(screen_set) != q:
            raise ShapeError("screen_set length must match the number of columns")

    max_support = cfg.max_support
    if max_support is None:
        max_support = min(n - 1, q)

    # standardize to ||x_j||^2 = n for penalization; supports are
    # scale-invariant so nothing needs mapping back
    norms = np.sqrt(np.einsum("ij,ij->j", X, X))
    scale = np.where(norms > 0, norms / np.sqrt(n), 1.0)
    Xs = X / scale

    mu0 = mean(family, np.zeros(n))
    s0 = float(np.max(np.abs(Xs.T @ (y - mu0)))) / n if q > 0 else 0.0
    if cfg.penalty == "sica":
        lam_max = s0 * cfg.a / (cfg.a + 1.0)
    else:
        lam_max = s0

    if lambda_grid is not None:
        grid = np.asarray(lambda_grid, dtype=float)
        if grid.ndim != 1 or grid.size < 1:
            raise ValueError("lambda_grid must be a nonempty vector")
        grid = np.sort(grid)[::-1].copy()
    elif lam_max <= 0.0:
        return CandidatePath(supports=[()], lambda_grid=np.zeros(1), screen_set=screen_set)
    else:
        grid = np.geomspace(lam_max, lam_max * cfg.lambda_min_ratio, cfg.n_lambda)

    state = _QuadraticState(Xs, use_gram=q <= _GRAM_LIMIT)
    beta = np.zeros(q)
    supports: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()
    for lam in grid:
        ok = _solve_one_lambda(family, y, state, beta, float(lam), cfg)
        if not ok:
            warnings.warn(
                f"penalized solve did not converge at lambda={lam:.4g}; support skipped",
                stacklevel=2,
            )
            continue
        nz = np.flatnonzero(beta)
        if nz.size > max_support:
            break
        support = tuple(screen_set[j] for j in nz)
        if support not in seen:
            seen.add(support)
            supports.append(support)
    return CandidatePath(supports=supports, lambda_grid=grid, screen_set=screen_set)


def sica_path(family: Family, y: np.ndarray, X_screened: np.ndarray,
              n_lambda: int = 100, lambda_min_ratio: float = 0.01, a: float = 0.5,
              *, screen_set: tuple[int, ...] | None = None,
              lambda_grid: np.ndarray | None = None, n_lla: int = 3,
              max_support: int | None = None) -> CandidatePath:
    """Candidate supports from the SICA penalty p(t) = lam (a+1) t / (a+t)."""
    cfg = PathConfig(penalty="sica", a=a, n_lambda=n_lambda,
                     lambda_min_ratio=lambda_min_ratio, n_lla=n_lla,
                     max_support=max_support)
    return _trace_path(family, y, X_screened, cfg, screen_set, lambda_grid)


def lasso_path(family: Family, y: np.ndarray, X_screened: np.ndarray,
               n_lambda: int = 100, lambda_min_ratio: float = 0.01,
               *, screen_set: tuple[int, ...] | None = None,
               lambda_grid: np.ndarray | None = None,
               max_support: int | None = None) -> CandidatePath:
    """Candidate supports from the plain L1 penalty (single LLA round)."""
    cfg = PathConfig(penalty="lasso", n_lambda=n_lambda,
                     lambda_min_ratio=lambda_min_ratio, n_lla=1,
                     max_support=max_support)
    return _trace_path(family, y, X_screened, cfg, screen_set, lambda_grid)


def path_from_config(family: Family, y: np.ndarray, X_screened: np.ndarray,
                     cfg: PathConfig, *, screen_set: tuple[int, ...] | None = None,
                     lambda_grid: np.ndarray | None = None) -> CandidatePath:
    if cfg.penalty == "lasso":
        cfg = replace(cfg, n_lla=1)
    return _trace_path(family, y, X_screened, cfg, screen_set, lambda_grid)


@dataclass
class ScoredCandidate:
    """One candidate support after refitting and scoring.

    ``error`` is set (and ``fitted``/``scores`` are None) when the
    unpenalized refit failed; a degenerate contrast leaves the fit in
    place with the generalized criteria unavailable.
    """

    support: tuple[int, ...]
    fitted: FittedModel | None
    contrast_estimate: ContrastEstimate | None
    scores: CriterionScores | None
    error: str | None = None


def _null_model(family: Family, y: np.ndarray, n: int) -> FittedModel:
    loglik = quasi_log_likelihood(family, y, np.zeros((n, 0)), np.zeros(0))
    return FittedModel(
        support=(), beta_hat=np.zeros(0), loglik=loglik, score_inf_norm=0.0,
        iterations=0, converged=True, loglik_trace=np.array([loglik]),
    )


def refit_and_score(candidates: CandidatePath, family: Family, y: np.ndarray,
                    X: np.ndarray, n: int | None = None,
                    p: int | None = None) -> list[ScoredCandidate]:
    """Unpenalized QMLE refit + contrast + criteria for every support.

    ``X`` is the full design; supports index into its columns.  Per-
    candidate failures are recorded, never raised.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if n is None:
        n = X.shape[0]
    if p is None:
        p = X.shape[1]

    out: list[ScoredCandidate] = []
    for support in candidates.supports:
        if len(support) == 0:
            fitted = _null_model(family, y, n)
            out.append(ScoredCandidate(
                support=(), fitted=fitted, contrast_estimate=None,
                scores=score_model(fitted, None, n, p),
            ))
            continue
        try:
            fitted = fit(family, y, X[:, list(support)], support=support)
        except MisselectError as exc:
            out.append(ScoredCandidate(
                support=support, fitted=None, contrast_estimate=None,
                scores=None, error=str(exc),
            ))
            continue
        ce: ContrastEstimate | None
        try:
            a_hat = estimate_A(family, X[:, list(support)], fitted.beta_hat)
            b_hat = estimate_B(family, X[:, list(support)], y, fitted.beta_hat)
            ce = contrast(a_hat, b_hat)
        except MisselectError:
            ce = None
        out.append(ScoredCandidate(
            support=support, fitted=fitted, contrast_estimate=ce,
            scores=score_model(fitted, ce, n, p),
        ))
    return out
