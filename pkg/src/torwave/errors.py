"""Exception hierarchy.

Every failure that reflects a violated precondition derives from
``PreconditionError`` so the CLI can map it to exit code 2.
"""


class TorwaveError(Exception):
    """Base class for all package errors."""


class PreconditionError(TorwaveError, ValueError):
    """Input outside the documented domain of an operation."""


class NumericalError(TorwaveError, ArithmeticError):
    """A numerical scheme could not reach its target accuracy."""


# specfun
class PoleError(PreconditionError):
    pass


class DomainError(PreconditionError):
    pass


class ConvergenceError(NumericalError):
    pass


class RegimeGapError(NumericalError):
    pass


# geometry
class GeometryError(PreconditionError):
    pass


class SingularityError(PreconditionError):
    pass


class GridError(PreconditionError):
    pass


# mehler_fock
class ClassError(PreconditionError):
    pass


class QuadratureError(NumericalError):
    pass


# wave_kernel
class ResolutionError(NumericalError):
    pass


class SupportError(PreconditionError):
    pass


# dispersive
class ParamError(PreconditionError):
    pass


class DegenerateError(PreconditionError):
    pass


class NoStationaryPoint(TorwaveError):
    """No admissible stationary point; the phase is monotone on the band."""


# oracle
class CFLError(PreconditionError):
    pass


class BlowupError(NumericalError):
    pass


class NonConvergence(NumericalError):
    pass
