"""Exception types raised by npcorner."""


class NPCornerError(Exception):
    """Base class for all library errors."""


class ConfigError(NPCornerError, ValueError):
    pass


class DomainError(NPCornerError, ValueError):
    pass


class PoleError(DomainError):
    pass


class NotInDomain(DomainError):
    pass


class OnBoundary(DomainError):
    pass


class NoConvergence(NPCornerError, RuntimeError):
    pass


class NearSingular(NPCornerError, RuntimeError):
    """Raised when a shifted operator is numerically singular."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class DegenerateKernel(NPCornerError, RuntimeError):
    pass


class TruncationError(NPCornerError, ValueError):
    pass


class SmallDenominator(NPCornerError, ZeroDivisionError):
    pass


class FitDiverged(NPCornerError, RuntimeError):
    pass


class WindowTooSmall(NPCornerError, ValueError):
    pass


class SchemaError(NPCornerError, ValueError):
    pass
