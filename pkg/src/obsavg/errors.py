"""Exception hierarchy with stable machine-readable codes."""
from __future__ import annotations


class ObsavgError(Exception):
    """Base class for all library errors.

    Attributes
    ----------
    code : str
        Stable identifier suitable for machine consumption (CLI diagnostics,
        tests). Subclasses set a default; instances may override it.
    details : dict
        Optional structured payload (residuals, offending dimensions, ...).
    """

    code = "ERROR"

    def __init__(self, message: str, *, code: str | None = None, details: dict | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code
        self.details = dict(details or {})


class DimensionMismatchError(ObsavgError):
    code = "DIMENSION_MISMATCH"


class DimensionCapError(ObsavgError):
    code = "DIM_CAP"


class OperatorValidationError(ObsavgError):
    code = "BAD_OPERATOR"


class StateValidationError(ObsavgError):
    code = "BAD_STATE"


class PovmValidationError(ObsavgError):
    # instances refine this to POVM_POSITIVITY / POVM_COMPLETENESS / POVM_BIASED
    code = "POVM_INVALID"


class FormatError(ObsavgError):
    code = "BAD_FORMAT"


class ConditioningError(ObsavgError):
    code = "PROBE_RANK"


class InfeasibleError(ObsavgError):
    code = "ADVERSARY_INFEASIBLE"


class NumericError(ObsavgError):
    code = "NUMERIC_FAILURE"
