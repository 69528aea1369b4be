"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of a function (non-finite, non-positive scale, ...)."""


class SolverError(RuntimeError):
    """Bracketed root finding could not proceed.

    Attributes
    ----------
    bracket : tuple of float
        The bracket end points that were tried.
    values : tuple of float
        The function values at the bracket end points.
    """

    def __init__(self, message, bracket=(), values=()):
        super().__init__(message)
        self.bracket = tuple(bracket)
        self.values = tuple(values)


class ConfigError(ValueError):
    """A configuration object failed validation."""


class DegenerateRateError(ValueError):
    """A hit rate or false alarm rate equals 0 or 1, so SEDI is undefined."""

    def __init__(self, message, hit_rate, false_alarm_rate):
        super().__init__(message)
        self.hit_rate = hit_rate
        self.false_alarm_rate = false_alarm_rate


class GridFormatError(ValueError):
    """A grid file could not be decoded.

    ``code`` is one of ``bad_magic``, ``dim_overflow``, ``truncated``,
    ``non_finite``, ``bad_metadata``, ``trailing_data``.
    """

    def __init__(self, code, message):
        super().__init__(f"{code}: {message}")
        self.code = code


class SaturationWarning(RuntimeWarning):
    """An exponent was clamped to avoid floating point overflow."""
