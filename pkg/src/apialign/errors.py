"""Exception hierarchy shared by the pipeline stages.

The CLI maps each class to an exit code: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""


class ApiAlignError(Exception):
    """Base class for all package errors."""


class ConfigError(ApiAlignError, ValueError):
    """Invalid configuration or command-line usage."""


class DataError(ApiAlignError, ValueError):
    """Malformed or unusable input data."""


class CorpusError(DataError):
    pass


class CheckpointError(DataError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointChecksumError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


class NumericError(ApiAlignError, ArithmeticError):
    """Non-finite values appeared during training or evaluation."""
