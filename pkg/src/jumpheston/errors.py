"""Exception types raised across the package."""


class JumpHestonError(Exception):
    """Base class for all package errors."""


class ParameterError(JumpHestonError, ValueError):
    """A model or grid parameter lies outside its admissible domain."""


class RegimeError(JumpHestonError):
    """The operation is not defined for the parameter regime at hand."""


class MomentUndefined(JumpHestonError, ValueError):
    """Requested stationary moment is infinite."""


class SingularSecondCoordinate(JumpHestonError, ZeroDivisionError):
    """Second coordinate of the reparameterised vector is (numerically) zero."""


class SchemeDomainError(JumpHestonError, ValueError):
    """The discretisation scheme is not defined for these parameters."""


class NonpositivePath(JumpHestonError, ValueError):
    """A path that must be strictly positive is not."""


class DegenerateStats(JumpHestonError, ValueError):
    """Path functionals violate the strict Cauchy-Schwarz gap i1*i2 > T**2."""
