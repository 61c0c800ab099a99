class StructInferError(Exception):
    """Base exception for all structinfer errors."""

    pass


class ConfigurationError(StructInferError):
    """Raised when a configuration value or a combination of values is invalid."""

    pass


class InvalidArgumentError(StructInferError):
    """Raised when an operation receives an argument outside its domain."""

    pass


class InstanceValidationError(StructInferError):
    """Raised when a frame instance violates its invariants."""

    pass


class DimensionMismatchError(StructInferError):
    """Raised when parameters, instances or files disagree on problem dimensions."""

    pass


class MissingLabelsError(StructInferError):
    """Raised when a loss or gradient is requested for an unlabeled instance."""

    pass


class PersistenceError(StructInferError):
    """Raised when there's an error saving or loading data."""

    pass


class UnsupportedVersionError(PersistenceError):
    """Raised when a file declares a format version this release cannot read."""

    pass
