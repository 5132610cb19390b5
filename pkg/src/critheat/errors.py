"""Exception hierarchy shared by all modules."""


class CritHeatError(Exception):
    """Base class for library errors."""


class DomainError(CritHeatError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NonConvergence(CritHeatError, ArithmeticError):
    """A numerical procedure exhausted its budget before meeting tolerance.

    ``achieved`` carries the best error estimate reached, when known.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class BracketError(CritHeatError):
    """Root bracketing failed; ``bracket`` holds the (lo, hi) interval reached."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class ChartError(CritHeatError, ValueError):
    """A point lies outside the coordinate chart of a submanifold."""


class ProjectionNonConvergence(NonConvergence):
    """Nearest-point projection onto a graph did not reach tolerance.

    ``bound`` is the smallest distance found (an upper bound on the true one).
    """

    def __init__(self, message, bound=None):
        super().__init__(message, achieved=bound)
        self.bound = bound


class SchemaError(CritHeatError, ValueError):
    """Configuration does not match the schema; ``path`` names the field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class ValidationError(CritHeatError, ValueError):
    """Configuration is well formed but violates a domain invariant."""


class OutsideDomain(CritHeatError, ValueError):
    """A point lies outside the open set D."""


class SingularityTooClose(CritHeatError, ValueError):
    """PV evaluation point is too close to the singular set for the inner radius."""


class ConfigError(CritHeatError, ValueError):
    """Invalid simulation configuration."""


class InsufficientSignal(CritHeatError):
    """Monte Carlo estimate too noisy for the requested fit."""
