# ghzsim/exceptions.py
"""
Error types for the simulator.

Every failure the package raises on purpose derives from GhzSimError, so the
management command can map it onto an exit code in one place.
"""


class GhzSimError(Exception):
    """Base class for all simulator errors."""


class InvalidArgumentError(GhzSimError, ValueError):
    """An argument violates an operation's precondition."""


class CapacityError(GhzSimError):
    """A dense representation was requested beyond its memory guard."""


class InfeasibleBudgetError(GhzSimError):
    """The time budget tau cannot host the requested protocol."""


class DomainError(GhzSimError, ValueError):
    """A parameter lies outside the mathematical domain of a formula."""


class ModelDomainError(GhzSimError, ValueError):
    """A linear outcome model produced a probability outside [0, 1]."""


class OracleViolation(GhzSimError):
    """An independent verification path disagreed with the fast path."""


class ConfigParseError(GhzSimError):
    """
    A run config file could not be parsed.

    Carries the offending line number and key (either may be None) so the
    command line can point at the exact spot.
    """

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        super().__init__(message)
