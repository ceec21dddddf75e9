"""
Error hierarchy for the LACK toolkit.

Every error raised on purpose by this package derives from LackError so the
CLI can map it to an exit status.
"""

from typing import Optional


class LackError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(LackError, ValueError):
    """A model parameter or function argument is outside its domain."""


class SaturationError(LackError, ArithmeticError):
    """Survival probability underflows, so conditional quantities are undefined."""


class EtaUnreachableError(InvalidParameterError):
    """No point of a MOS histogram satisfies P(MOS > MOS*) > eta."""


class InfeasibleScenarioError(LackError):
    """The simulator cannot guarantee that LACK packets miss the jitter buffer."""


class ConfigError(LackError):
    """
    A scenario or experiment file is missing a key or holds a bad value.

    Attributes:
        key_path (Optional[str]): Dotted path of the offending key, e.g. "controller.xi".
    """

    def __init__(self, message: str, key_path: Optional[str] = None) -> None:
        self.key_path: Optional[str] = key_path
        if key_path:
            message = f"{key_path}: {message}"
        super().__init__(message)


class UnknownFigureError(ConfigError):
    """The requested figure dataset id is not supported."""
