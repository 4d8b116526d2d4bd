"""Conditional-mean prediction and predictive uncertainty.

The predictor at a new input w* is mu + gamma^T Phi^{-1} (y - mu 1) with
gamma the covariance vector against the training inputs; the fitted model
caches Phi^{-1}(y - mu 1), so one triangular solve per target delivers
the mean-squared-error term as well.  Quantitative coordinates are
accepted in original units and mapped through the training scaling.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import MixedInput
from .errors import ExtrapolationWarning, InternalConsistencyError, ValidationError
from .inference import FittedModel
from .kernels import cross_cov_matrix, prior_variance
from .linalg import solve

__all__ = ["PredictionResult", "predict_one", "predict_batch", "write_predictions_csv"]

# negative predictive variance beyond this multiple of the prior variance
# indicates a broken model state rather than roundoff
_MSE_GUARD = 1e-8


@dataclass(frozen=True)
class PredictionResult:
    """Predictive mean and mean squared error in response units."""

    mean: float
    mse: float


def _prepare_target(model: FittedModel, w) -> tuple[np.ndarray, np.ndarray]:
    if not isinstance(w, MixedInput):
        w = MixedInput(tuple(w[0]), tuple(w[1]))
    schema = model.schema
    schema.validate_x(w.x, "target")
    schema.validate_z(w.z, "target")
    x = model.train.scale_x(np.asarray(w.x, dtype=float))
    if np.any(x < -1e-12) or np.any(x > 1 + 1e-12):
        k = int(np.argmax((x < 0) | (x > 1)))
        warnings.warn(
            f"target coordinate x{k + 1} lies outside the training range; "
            "extrapolating",
            ExtrapolationWarning,
            stacklevel=3,
        )
    return x, np.asarray(w.z, dtype=np.int64)


def _predict_from_gamma(model: FittedModel, gamma: np.ndarray) -> PredictionResult:
    mean = model.mu + float(gamma @ model.weights)
    pv = prior_variance(model.params)
    phi_inv_gamma = solve(model.factor, gamma)
    adj = 1.0 - float(gamma @ model.phi_inv_one)
    mse = pv - float(gamma @ phi_inv_gamma) + adj * adj / model.one_phi_one
    if mse < -_MSE_GUARD * pv:
        raise InternalConsistencyError(
            f"predictive variance {mse:.3e} is negative beyond tolerance"
        )
    mse = max(mse, 0.0)
    # map back from a standardized response scale, if one was used
    scale = model.train.y_scale
    return PredictionResult(mean * scale + model.train.y_offset, mse * scale * scale)


def predict_one(model: FittedModel, w) -> PredictionResult:
    """Predict a single mixed input (quantitative part in original units).

    Level indices outside the schema raise :class:`ValidationError`;
    unseen level *combinations* are fine, the covariance is defined for
    every valid level vector.  Quantitative extrapolation warns and
    proceeds.
    """
    x, z = _prepare_target(model, w)
    gamma = cross_cov_matrix(model.train, x[None, :], z[None, :], model.params)[0]
    return _predict_from_gamma(model, gamma)


def predict_batch(model: FittedModel, targets) -> list[PredictionResult]:
    """Elementwise :func:`predict_one`, order preserved.

    The first invalid target aborts the batch, naming its position.
    """
    out = []
    for i, w in enumerate(targets):
        try:
            out.append(predict_one(model, w))
        except ValidationError as e:
            raise ValidationError(f"target {i + 1}: {e}") from None
    return out


def write_predictions_csv(targets, results, schema, path) -> None:
    """Write ``x1..xp,z1..zq,mean,mse`` rows for a batch of predictions."""
    if len(targets) != len(results):
        raise ValidationError("targets and results must have equal lengths")
    header = schema.header()[:-1] + ["mean", "mse"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for w, r in zip(targets, results):
            if not isinstance(w, MixedInput):
                w = MixedInput(tuple(w[0]), tuple(w[1]))
            cells = [repr(float(v)) for v in w.x]
            cells += [str(int(v)) for v in w.z]
            cells += [repr(float(r.mean)), repr(float(r.mse))]
            fh.write(",".join(cells) + "\n")
