"""Exception types raised by the solver."""


class CavityError(Exception):
    """Base class for all solver errors."""


class DomainError(CavityError, ValueError):
    """A parameter lies outside the domain where a formula is defined."""


class DegenerateKernelError(CavityError, ValueError):
    """The ray-matrix element B vanishes, so the Fresnel kernel is singular."""


class UndersampledGridError(CavityError, ValueError):
    """Adjacent samples of a chirped kernel differ in phase by more than pi/2."""


class BoundaryValueError(CavityError, ValueError):
    """An observation point sits on an integration-domain boundary."""


class ConvergenceError(CavityError, RuntimeError):
    """The dense eigensolver failed to converge."""
