"""Exception hierarchy shared across the package."""


class PcriskError(Exception):
    """Base class for all package errors."""


class DataValidationError(PcriskError):
    """Invalid input data: bad CSV, impossible values, schema violations."""


class MissingValueError(PcriskError):
    """A record lacks a factor that the requested encoding needs."""


class MetricError(PcriskError):
    """A metric's preconditions are not met (e.g. single-class AUC input)."""


class FitError(PcriskError):
    """A model fit failed numerically."""


class SeparationError(FitError):
    """The logistic MLE does not exist (perfect separation) or the Hessian is singular."""


class InsufficientDataError(FitError):
    """Too few complete records to fit the requested model."""


class BankError(PcriskError):
    """Model-bank construction or lookup failure."""


class BankLoadError(BankError):
    """A persisted model bank could not be loaded (version/count/checksum)."""


class UsageError(PcriskError):
    """Command-line usage error."""
