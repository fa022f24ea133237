"""Exception hierarchy shared by all modules."""


class CascadeLaserError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(CascadeLaserError, ValueError):
    """A parameter lies outside its validity domain."""


class ValidityError(CascadeLaserError, ValueError):
    """A closed-form expression was requested outside its domain (eta <= 0)."""


class SingularSystemError(CascadeLaserError, ArithmeticError):
    """A denominator or a drift block is singular at the requested point."""

    def __init__(self, message, block=None, params=None):
        super().__init__(message)
        self.block = block
        self.params = params


class IntegrationError(CascadeLaserError, RuntimeError):
    """Time integration could not proceed (e.g. step-size underflow)."""

    def __init__(self, message, t_fail=None):
        super().__init__(message)
        self.t_fail = t_fail


class UnphysicalStateError(CascadeLaserError, ValueError):
    """Moments violate a physical constraint beyond tolerance."""


class TruncationError(CascadeLaserError, ValueError):
    """The Fock truncation is too small or exceeds the memory ceiling."""


class LeakageError(TruncationError):
    """Trace drift during oracle evolution exceeded its bound."""


class EmptySweepError(CascadeLaserError, RuntimeError):
    """No grid point of a sweep could be evaluated."""
