"""Simulation scenarios, selection/prediction metrics, and diagnostics.

Three data-generating processes (plus the correctly specified variant of
the first) drive the benchmark tables:

  linear_interaction_weak      y = X b + x1*x2 + eps, strong/weak effects
  linear_interaction_weak_correct   same response, interaction column
                                     appended to the design
  multiple_index               y = f(X1) + f(X2-X3) + f(X4-X5) + eps,
                               f(x) = x^3 / (x^2 + 1)
  logistic_interaction         Bernoulli with theta = X b + 2 x1*x2 + 2 x3*x4

Every random draw comes from a stream keyed by (master_seed, rep_index,
stream_tag) through numpy's SeedSequence, so datasets are bitwise
reproducible and replications may run in any order or in parallel.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit
from scipy.stats import kstest

from .contrast import estimate_A, true_contrast
from .criteria import CRITERIA, select
from .errors import MisselectError, NoSelectableModelError
from .families import BERNOULLI, GAUSSIAN, Family, cumulant
from .path import (
    PathConfig,
    ScreenConfig,
    path_from_config,
    refit_and_score,
    sis_screen,
)
from .qmle import FittedModel, best_misspecified_params, fit

SCENARIOS = (
    "linear_interaction_weak",
    "linear_interaction_weak_correct",
    "multiple_index",
    "logistic_interaction",
)

# stream tags for the splittable seeding scheme
_S_DESIGN = 0
_S_NOISE = 1
_S_TEST_DESIGN = 2
_S_TEST_NOISE = 3
_S_SCREEN = 4
_S_DIAG = 5

# robust standard deviation: IQR over the normal-consistency constant
RSD_SCALE = 1.349


def _rng(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


def _index_fn(x: np.ndarray) -> np.ndarray:
    """Link f(x) = x^3 / (x^2 + 1) of the multiple-index scenario."""
    return x ** 3 / (x ** 2 + 1.0)


@dataclass(frozen=True)
class ScenarioConfig:
    """Parameters of one simulation experiment (one scenario at one p)."""

    scenario: str
    p: int
    n: int = 0  # 0 means the scenario default (100, or 200 for logistic)
    sigma: float = 0.25
    n_reps: int = 100
    test_size: int = 10_000
    master_seed: int = 0
    screen: ScreenConfig = field(default_factory=ScreenConfig)
    path: PathConfig = field(default_factory=PathConfig)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.n == 0:
            default_n = 200 if self.scenario == "logistic_interaction" else 100
            object.__setattr__(self, "n", default_n)
        if self.n < 10:
            raise ValueError("n must be at least 10")
        if self.p < 10:
            raise ValueError("p must be at least 10")
        if self.test_size < 1:
            raise ValueError("test_size must be at least 1")
        if self.n_reps < 1:
            raise ValueError("n_reps must be at least 1")
        if self.master_seed < 0:
            raise ValueError("master_seed must be nonnegative")


class TestSet:
    """Lazily materialized independent test sample.

    Base columns are drawn per column index from their own stream, so the
    realized test set does not depend on which columns a caller touches.
    Appended interaction columns are products of base columns.
    """

    def __init__(self, size: int, master_seed: int, rep_index: int, n_base: int,
                 interactions: tuple[tuple[int, int], ...] = ()):
        self.size = size
        self.master_seed = master_seed
        self.rep_index = rep_index
        self.n_base = n_base
        self.interactions = interactions
        self.y: np.ndarray | None = None
        self.Ey: np.ndarray | None = None
        self._cache: dict[int, np.ndarray] = {}

    def column(self, j: int) -> np.ndarray:
        if j in self._cache:
            return self._cache[j]
        if j < 0 or j >= self.n_base + len(self.interactions):
            raise IndexError(f"test column {j} out of range")
        if j < self.n_base:
            col = _rng(self.master_seed, self.rep_index, _S_TEST_DESIGN, j).standard_normal(self.size)
        else:
            a, b = self.interactions[j - self.n_base]
            col = self.column(a) * self.column(b)
        self._cache[j] = col
        return col

    def design(self, support) -> np.ndarray:
        cols = [self.column(int(j)) for j in support]
        if not cols:
            return np.zeros((self.size, 0))
        return np.column_stack(cols)


@dataclass
class Dataset:
    """One replication's training data, truth, and held-out test set."""

    scenario: str
    family: Family
    X: np.ndarray
    y: np.ndarray
    Ey: np.ndarray
    var_y: np.ndarray
    M0: tuple[int, ...]
    M0_strong: tuple[int, ...]
    M0_weak: tuple[int, ...]
    target: tuple[int, ...]
    test: TestSet

    @property
    def p(self) -> int:
        return self.X.shape[1]


_BETA_LINEAR = np.array([1.0, -1.25, 0.75, -0.95, 1.5, 0.1, -0.1, 0.1, -0.1, 0.1])
_BETA_LOGISTIC = np.array([2.5, -1.9, 2.8, -2.2, 3.0])


def generate(config: ScenarioConfig, rep_index: int) -> Dataset:
    """Deterministically generate replication ``rep_index`` of a scenario."""
    n, p, sigma = config.n, config.p, config.sigma
    seed = config.master_seed
    X = _rng(seed, rep_index, _S_DESIGN).standard_normal((n, p))
    noise_rng = _rng(seed, rep_index, _S_NOISE)
    test_noise_rng = _rng(seed, rep_index, _S_TEST_NOISE)

    if config.scenario in ("linear_interaction_weak", "linear_interaction_weak_correct"):
        beta0 = np.zeros(p)
        beta0[:10] = _BETA_LINEAR
        inter = X[:, 0] * X[:, 1]
        Ey = X @ beta0 + inter
        y = Ey + sigma * noise_rng.standard_normal(n)
        correct = config.scenario == "linear_interaction_weak_correct"
        if correct:
            X_full = np.column_stack([X, inter])
            M0 = tuple(range(10)) + (p,)
            M0s = tuple(range(5)) + (p,)
            test = TestSet(config.test_size, seed, rep_index, p, interactions=((0, 1),))
        else:
            X_full = X
            M0 = tuple(range(10))
            M0s = tuple(range(5))
            test = TestSet(config.test_size, seed, rep_index, p)
        M0w = tuple(range(5, 10))
        Ey_t = test.design(range(10)) @ _BETA_LINEAR + test.column(0) * test.column(1)
        test.Ey = Ey_t
        test.y = Ey_t + sigma * test_noise_rng.standard_normal(config.test_size)
        return Dataset(
            scenario=config.scenario, family=GAUSSIAN, X=X_full, y=y, Ey=Ey,
            var_y=np.full(n, sigma ** 2), M0=M0, M0_strong=M0s, M0_weak=M0w,
            target=M0s, test=test,
        )

    if config.scenario == "multiple_index":
        Ey = _index_fn(X[:, 0]) + _index_fn(X[:, 1] - X[:, 2]) + _index_fn(X[:, 3] - X[:, 4])
        y = Ey + sigma * noise_rng.standard_normal(n)
        M0 = tuple(range(5))
        test = TestSet(config.test_size, seed, rep_index, p)
        Ey_t = (_index_fn(test.column(0))
                + _index_fn(test.column(1) - test.column(2))
                + _index_fn(test.column(3) - test.column(4)))
        test.Ey = Ey_t
        test.y = Ey_t + sigma * test_noise_rng.standard_normal(config.test_size)
        return Dataset(
            scenario=config.scenario, family=GAUSSIAN, X=X, y=y, Ey=Ey,
            var_y=np.full(n, sigma ** 2), M0=M0, M0_strong=M0, M0_weak=(),
            target=M0, test=test,
        )

    # logistic_interaction
    beta0 = np.zeros(p)
    beta0[:5] = _BETA_LOGISTIC
    theta = X @ beta0 + 2.0 * X[:, 0] * X[:, 1] + 2.0 * X[:, 2] * X[:, 3]
    pi = expit(theta)
    y = (noise_rng.random(n) < pi).astype(float)
    M0 = tuple(range(5))
    test = TestSet(config.test_size, seed, rep_index, p)
    theta_t = (test.design(range(5)) @ _BETA_LOGISTIC
               + 2.0 * test.column(0) * test.column(1)
               + 2.0 * test.column(2) * test.column(3))
    pi_t = expit(theta_t)
    test.Ey = pi_t
    test.y = (test_noise_rng.random(config.test_size) < pi_t).astype(float)
    return Dataset(
        scenario=config.scenario, family=BERNOULLI, X=X, y=y, Ey=pi,
        var_y=pi * (1.0 - pi), M0=M0, M0_strong=M0, M0_weak=(),
        target=M0, test=test,
    )


@dataclass
class SelectionMetrics:
    """Selection and out-of-sample error of one selected support."""

    selected: tuple[int, ...] | None
    consistent: bool
    includes: bool
    false_positives: float
    false_negatives_strong: float
    false_negatives_weak: float
    err: float  # prediction MSE, or classification error rate for logistic

    @classmethod
    def unavailable(cls) -> "SelectionMetrics":
        return cls(None, False, False, math.nan, math.nan, math.nan, math.nan)


@dataclass
class ReplicationResult:
    """Per-criterion metrics of one replication (plus the oracle row)."""

    rep_index: int
    per_criterion: dict[str, SelectionMetrics]


def evaluate(selected, dataset: Dataset, fitted: FittedModel | None = None) -> SelectionMetrics:
    """Refit the selected support and measure selection/prediction quality.

    ``fitted`` may pass along an existing unpenalized refit to avoid
    recomputing it; it must match ``selected``.
    """
    if selected is None:
        return SelectionMetrics.unavailable()
    sel = tuple(int(j) for j in selected)
    if fitted is None or fitted.support != sel:
        if len(sel) == 0:
            beta = np.zeros(0)
        else:
            try:
                fitted = fit(dataset.family, dataset.y, dataset.X[:, list(sel)], support=sel)
            except MisselectError:
                return SelectionMetrics.unavailable()
            beta = fitted.beta_hat
    else:
        beta = fitted.beta_hat

    theta_t = dataset.test.design(sel) @ beta if len(sel) else np.zeros(dataset.test.size)
    if dataset.family.kind == "bernoulli":
        err = float(np.mean((theta_t > 0.0) != (dataset.test.y > 0.5)))
    else:
        err = float(np.mean((dataset.test.y - theta_t) ** 2))

    sel_set = set(sel)
    target = set(dataset.target)
    m0 = set(dataset.M0)
    return SelectionMetrics(
        selected=sel,
        consistent=sel_set == target,
        includes=target.issubset(sel_set),
        false_positives=float(len(sel_set - m0)),
        false_negatives_strong=float(len(set(dataset.M0_strong) - sel_set)),
        false_negatives_weak=float(len(set(dataset.M0_weak) - sel_set)),
        err=err,
    )


def run_replication(config: ScenarioConfig, rep_index: int) -> ReplicationResult:
    """Generate, screen, trace the path, score, select, and evaluate once."""
    ds = generate(config, rep_index)
    screen_rng = _rng(config.master_seed, rep_index, _S_SCREEN)
    screen_set = sis_screen(ds.family, ds.y, ds.X, config.screen, screen_rng)
    cand_path = path_from_config(
        ds.family, ds.y, ds.X[:, screen_set], config.path, screen_set=tuple(screen_set),
    )
    candidates = refit_and_score(cand_path, ds.family, ds.y, ds.X)
    scores = [c.scores for c in candidates]

    per_criterion: dict[str, SelectionMetrics] = {}
    for crit in CRITERIA:
        try:
            idx = select(scores, crit)
        except NoSelectableModelError:
            per_criterion[crit] = SelectionMetrics.unavailable()
            continue
        chosen = candidates[idx]
        per_criterion[crit] = evaluate(chosen.support, ds, fitted=chosen.fitted)
    per_criterion["oracle"] = evaluate(ds.M0, ds)
    return ReplicationResult(rep_index=rep_index, per_criterion=per_criterion)


def robust_sd(values: np.ndarray) -> float:
    """IQR / 1.349, the normal-consistent robust standard deviation."""
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return math.nan
    q75, q25 = np.percentile(v, [75.0, 25.0])
    return float((q75 - q25) / RSD_SCALE)


@dataclass
class SummaryRow:
    """One aggregated table row; error entries are scaled by 100."""

    criterion: str
    consistent_pct: float
    inclusion_pct: float
    median_err: float
    rsd_err: float
    median_fp: float
    median_fn_strong: float
    median_fn_weak: float


@dataclass
class ExperimentResult:
    config: ScenarioConfig
    rows: list[SummaryRow]
    replications: list[ReplicationResult]


def _nanmedian(values: np.ndarray) -> float:
    v = values[np.isfinite(values)]
    return float(np.median(v)) if v.size else math.nan


def run_experiment(config: ScenarioConfig, workers: int = 1) -> ExperimentResult:
    """Aggregate ``config.n_reps`` replications into one table.

    The output is a pure fold over per-replication results ordered by
    replication index, so it is identical for any worker count.
    """
    reps = range(config.n_reps)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_replication, [config] * config.n_reps, reps))
    else:
        results = [run_replication(config, r) for r in reps]

    rows = []
    for crit in CRITERIA + ("oracle",):
        metrics = [res.per_criterion[crit] for res in results]
        errs = np.array([m.err for m in metrics])
        rows.append(SummaryRow(
            criterion=crit,
            consistent_pct=100.0 * float(np.mean([m.consistent for m in metrics])),
            inclusion_pct=100.0 * float(np.mean([m.includes for m in metrics])),
            median_err=100.0 * _nanmedian(errs),
            rsd_err=100.0 * robust_sd(errs),
            median_fp=_nanmedian(np.array([m.false_positives for m in metrics])),
            median_fn_strong=_nanmedian(np.array([m.false_negatives_strong for m in metrics])),
            median_fn_weak=_nanmedian(np.array([m.false_negatives_weak for m in metrics])),
        ))
    return ExperimentResult(config=config, rows=rows, replications=results)


# ---------------------------------------------------------------------------
# Theorem diagnostics
# ---------------------------------------------------------------------------

def scenario_truth(scenario: str, n: int, d: int, sigma: float = 0.25,
                   master_seed: int = 0):
    """Fixed design plus analytic truth for the diagnostics.

    Returns (family, X, Ey, var_y, truth_kind) with X an n-by-d design held
    fixed across diagnostic replications.
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    X = _rng(master_seed, 0, _S_DESIGN).standard_normal((n, d))
    if scenario == "multiple_index":
        if d < 5:
            raise ValueError("multiple_index truth needs d >= 5")
        Ey = _index_fn(X[:, 0]) + _index_fn(X[:, 1] - X[:, 2]) + _index_fn(X[:, 3] - X[:, 4])
        return GAUSSIAN, X, Ey, np.full(n, sigma ** 2), "gaussian"
    if scenario in ("linear_interaction_weak", "linear_interaction_weak_correct"):
        beta0 = np.zeros(d)
        beta0[: min(10, d)] = _BETA_LINEAR[: min(10, d)]
        Ey = X @ beta0
        if d >= 2:
            Ey = Ey + X[:, 0] * X[:, 1]
        return GAUSSIAN, X, Ey, np.full(n, sigma ** 2), "gaussian"
    beta0 = np.zeros(d)
    beta0[: min(5, d)] = _BETA_LOGISTIC[: min(5, d)]
    theta = X @ beta0
    if d >= 2:
        theta = theta + 2.0 * X[:, 0] * X[:, 1]
    if d >= 4:
        theta = theta + 2.0 * X[:, 2] * X[:, 3]
    pi = expit(theta)
    return BERNOULLI, X, pi, pi * (1.0 - pi), "bernoulli"


def _sample_response(truth_kind: str, Ey: np.ndarray, var_y: np.ndarray,
                     rng: np.random.Generator) -> np.ndarray:
    if truth_kind == "gaussian":
        return Ey + np.sqrt(var_y) * rng.standard_normal(Ey.shape[0])
    if truth_kind == "bernoulli":
        return (rng.random(Ey.shape[0]) < Ey).astype(float)
    raise ValueError(f"unknown truth kind {truth_kind!r}")


@dataclass
class KLExpansionDiagnostic:
    lhs: float
    rhs: float
    trace_h: float
    rel_gap: float


def kl_expansion_diagnostic(family: Family, X: np.ndarray, Ey: np.ndarray,
                            var_y: np.ndarray, n_reps: int, master_seed: int = 0,
                            truth_kind: str = "gaussian") -> KLExpansionDiagnostic:
    """Monte Carlo check of the expected out-of-sample likelihood expansion.

    Compares the mean of Ey' X bhat - 1' b(X bhat) against the mean of
    l(y, bhat) minus the population contrast trace.
    """
    if n_reps < 1:
        raise ValueError("insufficient replications: n_reps must be at least 1")
    X = np.asarray(X, dtype=float)
    Ey = np.asarray(Ey, dtype=float)
    var_y = np.asarray(var_y, dtype=float)
    tc = true_contrast(family, X, Ey, var_y)

    etas = np.empty(n_reps)
    logliks = np.empty(n_reps)
    for r in range(n_reps):
        rng = _rng(master_seed, r, _S_DIAG)
        y = _sample_response(truth_kind, Ey, var_y, rng)
        fitted = fit(family, y, X)
        theta_hat = X @ fitted.beta_hat
        etas[r] = float(Ey @ theta_hat - np.sum(cumulant(family, theta_hat)))
        logliks[r] = fitted.loglik

    lhs = float(np.mean(etas))
    rhs = float(np.mean(logliks)) - tc.trace_h
    rel_gap = abs(lhs - rhs) / max(tc.trace_h, 1.0)
    return KLExpansionDiagnostic(lhs=lhs, rhs=rhs, trace_h=tc.trace_h, rel_gap=rel_gap)


@dataclass
class NormalityDiagnostic:
    ks_stat: float
    p_value: float
    passed: bool
    z: np.ndarray


def normality_diagnostic(family: Family, X: np.ndarray, Ey: np.ndarray,
                         var_y: np.ndarray, contrast_direction: np.ndarray,
                         n_reps: int, master_seed: int = 0,
                         truth_kind: str = "gaussian",
                         alpha: float = 0.01) -> NormalityDiagnostic:
    """Kolmogorov-Smirnov check of the QMLE's asymptotic normality.

    Projects B^{-1/2} A (bhat - b0) onto a unit direction per replication
    and tests the projections against the standard normal.
    """
    if n_reps < 100:
        raise ValueError("minimum 100 replications enforced for the KS diagnostic")
    X = np.asarray(X, dtype=float)
    d = X.shape[1]
    if d > 5:
        raise ValueError("normality diagnostic supports d <= 5")
    direction = np.asarray(contrast_direction, dtype=float)
    if direction.shape != (d,):
        raise ValueError(f"contrast_direction must have length {d}")
    nrm = float(np.linalg.norm(direction))
    if not math.isclose(nrm, 1.0, rel_tol=1e-6):
        raise ValueError("contrast_direction must be a unit vector")
    Ey = np.asarray(Ey, dtype=float)
    var_y = np.asarray(var_y, dtype=float)

    beta0 = best_misspecified_params(family, Ey, X)
    A = estimate_A(family, X, beta0)
    B = 0.5 * ((X * var_y[:, None]).T @ X + ((X * var_y[:, None]).T @ X).T)
    evals, evecs = np.linalg.eigh(B)
    if evals.min() <= 0:
        raise ValueError("population B matrix is not positive definite")
    B_inv_sqrt = (evecs / np.sqrt(evals)) @ evecs.T
    C = B_inv_sqrt @ A
    row = direction @ C

    z = np.empty(n_reps)
    for r in range(n_reps):
        rng = _rng(master_seed, r, _S_DIAG)
        y = _sample_response(truth_kind, Ey, var_y, rng)
        fitted = fit(family, y, X)
        z[r] = float(row @ (fitted.beta_hat - beta0))

    ks = kstest(z, "norm")
    return NormalityDiagnostic(
        ks_stat=float(ks.statistic), p_value=float(ks.pvalue),
        passed=bool(ks.pvalue >= alpha), z=z,
    )
