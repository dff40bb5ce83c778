"""Exception hierarchy shared by every module.

Each class maps to one CLI exit code so the command line can translate
failures without string matching.
"""


class RmtcovError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(RmtcovError, ValueError):
    """Invalid parameter, option string or configuration value."""

    exit_code = 2


class DimensionError(ConfigError):
    """Array shapes are incompatible with the requested operation."""


class DomainError(ConfigError):
    """Argument lies outside the mathematical domain of a function."""


class RegimeError(ConfigError):
    """Sample size regime unsupported (for instance ``p >= n``)."""


class NumericalError(RmtcovError, ArithmeticError):
    """A numerical routine failed to produce a trustworthy answer."""

    exit_code = 3


class IllConditionedError(NumericalError):
    """Matrix condition number exceeds the configured guard."""


class PoleError(NumericalError):
    """A rational function was evaluated at one of its poles."""


class BracketError(NumericalError):
    """A root bracket does not contain a sign change."""


class DegenerateSpectrumError(NumericalError):
    """Eigenvalues coincide closely enough to break closed-form formulas."""


class IntegrationError(NumericalError):
    """Contour quadrature failed to converge."""


class StepTooLargeError(NumericalError):
    """A retraction step left the positive definite cone."""


class StallError(NumericalError):
    """Line search found no decrease; carries the partial trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class DataIOError(RmtcovError, OSError):
    """File could not be read, parsed or written."""

    exit_code = 4


class ParseError(DataIOError):
    """Malformed numeric CSV content."""
