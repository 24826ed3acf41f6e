"""Exception hierarchy shared by every stage of the pipeline."""


class TimError(Exception):
    """Base class for all errors raised by timatch."""


class SchemaError(TimError):
    """Column-role schema is malformed or does not fit the input file."""


class ValidationError(TimError):
    """Input data violates a contract (bad cell, non-binary treatment, ...)."""

    def __init__(self, message, rows=None):
        super().__init__(message)
        self.rows = list(rows) if rows is not None else []


class DegenerateDataError(TimError):
    """Data is well-formed but cannot support estimation (e.g. no controls)."""


class EstimationError(DegenerateDataError):
    """Raised when an estimate is undefined, e.g. there are no matched strata."""


class ImbalanceError(TimError):
    """L1 imbalance is undefined for the given groups."""
