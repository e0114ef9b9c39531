"""Information criteria for fitted candidate models.

Six criteria are scored per model.  AIC and BIC use the model size |M|;
the generalized criteria replace or augment it with tr(H) and log|H|
where H is the covariance contrast matrix:

    aic     = -2 l + 2 |M|
    bic     = -2 l + log(n) |M|
    gaic    = -2 l + 2 tr(H)
    gbic    = -2 l + log(n) |M| - log|H|
    gbicp_l = -2 l + log(n) |M| + tr(H) - log|H|
    gbicp   = -2 l + 2 log(p*) |M| + tr(H) - log|H|,  p* = max(n, p)

Model-size-linear constants of the underlying expansions are dropped
throughout; emitted manifests record this convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .contrast import ContrastEstimate
from .errors import NoSelectableModelError
from .qmle import FittedModel

CRITERIA = ("aic", "bic", "gaic", "gbic", "gbicp_l", "gbicp")
GENERALIZED = ("gaic", "gbic", "gbicp_l", "gbicp")


@dataclass
class CriterionScores:
    """All six criterion values (and their ingredients) for one candidate.

    Generalized criteria are None exactly when the contrast was degenerate
    or the fit did not converge.
    """

    model_size: int
    loglik: float
    trace_h: float | None
    logdet_h: float | None
    aic: float
    bic: float
    gaic: float | None
    gbic: float | None
    gbicp_l: float | None
    gbicp: float | None
    n: int
    p: int
    p_star: int

    def value(self, criterion: str) -> float | None:
        if criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {criterion!r}; expected one of {CRITERIA}")
        return getattr(self, criterion)


def score_model(fitted: FittedModel, contrast: ContrastEstimate | None,
                n: int, p: int) -> CriterionScores:
    """Score one fitted candidate under all six criteria.

    ``contrast=None`` flags a degenerate (or unavailable) contrast.  The
    empty support is scored with tr(H) = log|H| = 0 by convention, so its
    generalized criteria stay available.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    size = fitted.size
    if size > 0 and p < max(fitted.support) + 1:
        raise ValueError(f"p={p} smaller than largest support index {max(fitted.support)}")

    p_star = max(n, p)
    neg2l = -2.0 * fitted.loglik
    log_n = math.log(n)
    aic = neg2l + 2.0 * size
    bic = neg2l + log_n * size

    if size == 0 and fitted.converged:
        th, ld = 0.0, 0.0
    elif contrast is None or not fitted.converged:
        th = ld = None
    else:
        th, ld = contrast.trace_h, contrast.logdet_h

    if th is None:
        gaic = gbic = gbicp_l = gbicp = None
    else:
        gaic = neg2l + 2.0 * th
        gbic = neg2l + log_n * size - ld
        gbicp_l = neg2l + log_n * size + th - ld
        gbicp = neg2l + 2.0 * math.log(p_star) * size + th - ld

    return CriterionScores(
        model_size=size, loglik=fitted.loglik, trace_h=th, logdet_h=ld,
        aic=aic, bic=bic, gaic=gaic, gbic=gbic, gbicp_l=gbicp_l, gbicp=gbicp,
        n=n, p=p, p_star=p_star,
    )


def select(scores: Sequence[CriterionScores], criterion: str, ids: Sequence | None = None):
    """Return the id of the candidate minimizing ``criterion``.

    Ties break toward the smaller model size, then the smaller id.
    ``ids`` defaults to list indices.
    """
    if ids is None:
        ids = list(range(len(scores)))
    if len(ids) != len(scores):
        raise ValueError("ids and scores must have equal length")

    best = None
    for cid, sc in zip(ids, scores):
        if sc is None:
            continue
        val = sc.value(criterion)
        if val is None or not math.isfinite(val):
            continue
        key = (val, sc.model_size, cid)
        if best is None or key < best:
            best = key
    if best is None:
        raise NoSelectableModelError(f"no candidate has criterion {criterion!r} available")
    return best[2]
