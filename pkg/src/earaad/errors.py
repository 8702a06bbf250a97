"""Exception hierarchy shared across the package.

The CLI maps :class:`ConfigError` to exit code 2 and :class:`DataError`
(including :class:`FormatError`) to exit code 3.
"""


class AADError(ValueError):
    """Base class for all errors raised by earaad."""


class ConfigError(AADError):
    """Invalid parameters, incompatible sampling rates, unsupported ratios."""


class LayoutError(ConfigError):
    """A channel layout references labels that are not present."""


class SchemaError(ConfigError):
    """Channel sets or trial structure do not line up."""


class DataError(AADError):
    """Input data is unusable (non-finite, too short, degenerate)."""


class FormatError(DataError):
    """A file on disk does not match its declared format."""


class RankDeficientError(DataError):
    """Unregularized normal equations are singular."""


class UndefinedCorrelationError(DataError):
    """Pearson correlation requested for a constant series."""
