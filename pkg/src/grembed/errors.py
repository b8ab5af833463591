"""Exception types shared across the package.

Most subclass ValueError so callers that only know the stdlib hierarchy
still catch the right thing; the package-specific base lets tests be
precise about which contract was violated.
"""


class GrembedError(Exception):
    """Base class for all package-specific errors."""


class EdgeListParseError(GrembedError, ValueError):
    """Malformed input file; carries the 1-based line number."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class ValidationError(GrembedError, ValueError):
    """Input violates a documented precondition (domain/validation errors)."""


class ShapeError(GrembedError, ValueError):
    """Operands have incompatible shapes."""


class ContractError(GrembedError, ValueError):
    """Caller broke an API contract (bad config value, out-of-range arg)."""


class NumericError(GrembedError, ArithmeticError):
    """Non-finite values where finite ones are required."""


class ResourceLimitError(GrembedError, RuntimeError):
    """A guarded dense/quadratic operation exceeded its size cap."""


class ConvergenceError(GrembedError, RuntimeError):
    """Iteration failed to reach tolerance; carries the final residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConfigError(GrembedError, ValueError):
    """Bad or contradictory configuration (CLI / config file)."""
