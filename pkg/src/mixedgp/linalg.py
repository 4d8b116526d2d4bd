"""Stabilized dense symmetric linear algebra for likelihoods and prediction.

Covariance matrices here are positive semi-definite by construction but
may be numerically singular (duplicated inputs, extreme correlation
lengths).  Factorization walks a nugget ladder, inflating the diagonal by
the smallest multiple of its mean that lets the Cholesky succeed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NotPositiveDefiniteError, ValidationError
from .kernels import CovMatrix

__all__ = ["NUGGET_LADDER", "CholeskyFactor", "cholesky_with_nugget", "log_det", "solve"]

# multiples of mean(diag); 0 first so well-posed matrices stay exact
NUGGET_LADDER = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor of (Phi + nugget * I)."""

    L: np.ndarray
    nugget: float

    def __post_init__(self):
        L = np.asarray(self.L, dtype=float)
        L.flags.writeable = False
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "nugget", float(self.nugget))

    @property
    def n(self) -> int:
        return self.L.shape[0]


def cholesky_with_nugget(matrix) -> CholeskyFactor:
    """Factor a symmetric PSD matrix, recording the nugget that was needed.

    Tries ``nugget = r * mean(diag)`` for each ladder rung r in
    ``NUGGET_LADDER`` and returns at the first success.  Raises
    :class:`NotPositiveDefiniteError` naming the cap when even the top
    rung fails.
    """
    if isinstance(matrix, CovMatrix):
        values = matrix.values
    else:
        values = np.asarray(matrix, dtype=float)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ValidationError("matrix must be square")
    n = values.shape[0]
    scale = float(np.mean(np.diag(values)))
    for rung in NUGGET_LADDER:
        nugget = rung * scale
        try:
            L = scipy.linalg.cholesky(
                values + nugget * np.eye(n) if nugget else values, lower=True
            )
        except scipy.linalg.LinAlgError:
            continue
        return CholeskyFactor(L, nugget)
    cap = NUGGET_LADDER[-1] * scale
    raise NotPositiveDefiniteError(
        f"matrix is not positive definite even with nugget {cap:.3e} "
        f"({NUGGET_LADDER[-1]:g} * mean diagonal)",
        nugget_cap=cap,
    )


def log_det(factor: CholeskyFactor) -> float:
    """log determinant of (Phi + nugget * I) from the factor diagonal."""
    return 2.0 * float(np.sum(np.log(np.diag(factor.L))))


def solve(factor: CholeskyFactor, b):
    """(Phi + nugget * I)^{-1} b via forward/back substitution."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != factor.n:
        raise ValidationError(f"dimension mismatch: factor is {factor.n}, b has {b.shape[0]} rows")
    return scipy.linalg.cho_solve((factor.L, True), b)
