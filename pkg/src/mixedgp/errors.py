"""Exception hierarchy and warning categories shared across the package."""


class MixedGPError(Exception):
    """Base class for all package errors."""


class ValidationError(MixedGPError, ValueError):
    """Invalid input data, schema, parameters, or configuration."""


class NotPositiveDefiniteError(MixedGPError):
    """Cholesky factorization failed even at the top of the nugget ladder."""

    def __init__(self, message, nugget_cap=None):
        super().__init__(message)
        self.nugget_cap = nugget_cap


class FitError(MixedGPError):
    """Model fitting failed; carries per-start diagnostics when available."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class EmptyKeySubsetError(MixedGPError):
    """Localized subset selection produced no training rows."""

    def __init__(self, message, n_s=None, levels=None):
        super().__init__(message)
        self.n_s = n_s
        self.levels = levels


class SubsetGuidanceError(MixedGPError):
    """No admissible localization tuning value exists for this dataset."""


class InternalConsistencyError(MixedGPError):
    """A quantity violated an invariant beyond numerical tolerance."""


class ConstantColumnWarning(UserWarning):
    """A quantitative column is constant; it was mapped to 0.5."""


class ExtrapolationWarning(UserWarning):
    """A prediction input lies outside the range seen in training."""
