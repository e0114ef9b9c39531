"""Exception types shared across the toolkit.

The CLI maps these onto its exit-code contract (0 success, 1 usage,
2 solver failure, 3 degenerate contrast), so solver code should raise
one of these rather than a bare RuntimeError.
"""

from __future__ import annotations

import numpy as np


class MisselectError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(MisselectError, ValueError):
    """Dimensions of the supplied arrays do not conform."""


class SingularDesignError(MisselectError):
    """The weighted normal matrix is rank deficient (Cholesky pivot failure)."""


class DivergenceError(MisselectError):
    """The Newton iterates ran away (e.g. separation in logistic regression).

    Carries the last iterate so callers can inspect how far the solver got.
    """

    def __init__(self, message: str, last_beta: np.ndarray):
        super().__init__(message)
        self.last_beta = np.asarray(last_beta)


class ConvergenceError(MisselectError):
    """An iterative solve stopped before reaching its required tolerance."""


class NotPositiveDefiniteError(MisselectError):
    """A matrix required to be symmetric positive definite is not."""


class DegenerateContrastError(MisselectError):
    """A generalized eigenvalue of the contrast collapsed to (numerical) zero.

    Signals a near-perfect fit; generalized criteria are unavailable for
    the affected candidate model.
    """


class NoSelectableModelError(MisselectError):
    """No candidate model has the requested criterion available."""
