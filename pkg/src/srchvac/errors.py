"""Exception hierarchy shared by all modules."""


class SrcHvacError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(SrcHvacError, ValueError):
    """An argument violates a documented precondition."""


class DataError(SrcHvacError, ValueError):
    """Input data is degenerate (zero-norm samples, non-finite targets, ...)."""


class IngestionError(SrcHvacError, OSError):
    """A required input file is missing or unreadable."""


class FormatError(SrcHvacError, ValueError):
    """An input file exists but does not follow the expected layout."""


class ConfigError(SrcHvacError, ValueError):
    """An experiment configuration failed validation."""
