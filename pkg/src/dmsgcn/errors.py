"""Exception hierarchy shared by every module of the package."""


class DMSGCNError(Exception):
    """Base class for all package errors."""


class DimensionError(DMSGCNError, ValueError):
    """Operand shapes do not agree."""


class ConfigError(DMSGCNError, ValueError):
    """Invalid configuration value or unknown configuration key."""


class ContractError(DMSGCNError, RuntimeError):
    """An operation was called outside its documented preconditions."""


class ValidationError(DMSGCNError, ValueError):
    """Structural validation of a skeleton, index list or similar failed."""


class NumericalError(DMSGCNError, FloatingPointError):
    """Non-finite values appeared where finite ones are required."""


class DataError(DMSGCNError):
    """Base class for motion-data loading problems."""


class EmptyFileError(DataError):
    pass


class ColumnCountError(DataError):
    pass


class NonNumericError(DataError):
    pass


class MissingDataError(DataError, FileNotFoundError):
    pass


class CheckpointError(DMSGCNError):
    """Base class for checkpoint persistence problems."""


class CheckpointVersionError(CheckpointError):
    pass


class ChecksumError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class ConfigMismatchError(CheckpointError):
    pass
