"""Exception types raised by the audit pipeline."""


class AuditError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(AuditError):
    """Schema is internally inconsistent or does not match the data file."""


class ParseError(AuditError):
    """A data file cell could not be parsed."""


class EmptyGroupError(AuditError):
    """One of the two comparison groups has no rows."""


class PredictionFormatError(AuditError):
    """A prediction file violates the wire-format contract."""


class TrainingError(AuditError):
    """Model training failed or diverged."""


class FoldError(AuditError):
    """A cross-validation fold cannot be trained or scored."""


class MatrixError(AuditError):
    """A covariance matrix is unusable even after regularization."""


class ConfigError(AuditError):
    """The requested operation conflicts with the run configuration."""


class InsufficientBinsError(AuditError):
    """Too few usable score bins to run a goodness-of-fit test."""
