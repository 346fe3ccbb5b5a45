"""Exception hierarchy.

Numerical failures derive from MVSDEError and map to exit status 2 in the
command-line front-end. Configuration problems derive from ValueError and map
to exit status 1.
"""
from typing import Optional


class MVSDEError(Exception):
    """Base class for numerical failures."""


class QuadratureFailure(MVSDEError):
    """Requested quadrature tolerance could not be reached."""


class NotNormalizable(MVSDEError):
    """The stationary density has infinite mass (growth audit failed)."""


class BracketFailure(MVSDEError):
    """No sign change found inside the growth-bound search window."""


class NotApplicable(MVSDEError):
    """An operation's structural precondition does not hold for the model."""


class WindowTooSmall(MVSDEError):
    """F has the same sign at both ends of the root scan window."""


class NoSignChange(MVSDEError):
    """A threshold function never changed sign over the expanded bracket."""


class ConstructionFailure(MVSDEError):
    """No admissible scaling was found within the doubling budget."""


class Divergence(MVSDEError):
    """A particle left the divergence bound or became non-finite."""


class ConfigError(ValueError):
    """Base class for job configuration errors."""


class ParseError(ConfigError):
    """Configuration file is not well-formed JSON."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        location = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{location}")


class ValidationError(ConfigError):
    """Configuration value rejected; `field` names the offending entry."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
