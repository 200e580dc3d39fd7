"""Exception types shared across the package."""


class PlumebenchError(Exception):
    """Base class for package-specific failures."""


class CubeFormatError(PlumebenchError, ValueError):
    """Base class for cube/mask container parse failures."""


class HeaderParseError(CubeFormatError):
    """The JSON header line is missing, malformed, or carries a bad magic."""


class DimensionMismatchError(CubeFormatError):
    """Header fields disagree with each other (e.g. wavelengths vs band_count)."""


class TruncatedPayloadError(CubeFormatError):
    """The binary payload is shorter than the header declares."""


class CalibrationError(PlumebenchError):
    """Signal-strength calibration could not bracket the target rate."""


class NumericalError(PlumebenchError):
    """A numerical routine produced non-finite values.

    Carries the last feasible iterate seen before the failure, when available.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class ConfigError(PlumebenchError, ValueError):
    """A run configuration failed schema validation or is inconsistent."""
