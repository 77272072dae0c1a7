"""Exception hierarchy shared across the toolkit."""


class StreamVQError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(StreamVQError, ValueError):
    """Invalid argument value or combination."""


class DataError(StreamVQError):
    """Problem with input data (missing files, undecodable frames, bad CSV rows)."""


class CheckpointFormatError(StreamVQError):
    """Checkpoint file is not in the expected format (bad magic or version)."""


class CheckpointIntegrityError(StreamVQError):
    """Checkpoint file is damaged or does not match the expected tensor layout."""


class ConfigMismatchError(StreamVQError):
    """Stored model configuration conflicts with the one requested."""


class NumericError(StreamVQError):
    """Numeric failure during training or inference (NaN loss, divergence)."""


class UndefinedCorrelationError(StreamVQError):
    """Pearson correlation requested on a constant series."""
