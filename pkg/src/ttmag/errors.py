"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2,
numerical failures exit 3 and protocol failures (no transition inside a
bracket) exit 4.
"""


class TTMError(Exception):
    """Base class for all package errors."""


class ConfigError(TTMError, ValueError):
    """Invalid or inconsistent configuration."""


class DomainError(TTMError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class NumericalError(TTMError, ArithmeticError):
    """Integrator, quadrature or series result failed an accuracy check."""


class ClassificationError(TTMError):
    """Heat/work sign pattern matches no operating regime."""


class ProtocolError(TTMError):
    """Failure of the estimation protocol itself."""


class BracketError(ProtocolError):
    """No sign change of the hot-bath heat inside the bracket."""


class ConvergenceError(ProtocolError):
    """Iteration budget exhausted before reaching tolerance."""
