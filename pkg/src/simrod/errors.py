"""Exception types shared across the package."""


class SimrodError(Exception):
    """Base class for package errors."""


class ConfigError(SimrodError, ValueError):
    """Invalid configuration value or combination."""


class ParseError(SimrodError, ValueError):
    """Malformed on-disk record; message names the file and line."""


class ContractViolation(SimrodError, RuntimeError):
    """A caller broke a documented precondition."""


class GainUndefinedError(SimrodError, ValueError):
    """Effective gain requested with oracle == source but adapted != source."""
