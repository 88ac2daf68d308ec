"""Exception types shared across the package."""


class NN3DError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(NN3DError):
    """Unreadable, unsupported, or inconsistent image/table file."""


class DimensionError(NN3DError):
    """Shape mismatch or out-of-bounds coordinate."""


class ConfigError(NN3DError):
    """Invalid configuration value or schedule."""


class ExternalDenoiserError(NN3DError):
    """External denoiser subprocess failed.

    Carries the captured stderr of the subprocess when available.
    """

    def __init__(self, message, stderr=""):
        super().__init__(message)
        self.stderr = stderr
