"""Exception hierarchy shared by the solvers."""


class LaminateError(Exception):
    """Base class for all package errors."""


class DomainError(LaminateError, ValueError):
    """A parameter lies outside the range where an object is defined."""


class ChartError(LaminateError, ValueError):
    """A point lies outside the domain of a level-set chart."""


class IntegrationError(LaminateError):
    """Step-size underflow in the one-step integrator.

    ``t`` and ``state`` hold the last accepted point.
    """

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class ResourceError(LaminateError):
    """A hard work limit (step count, mesh size) was exceeded."""


class ProjectionError(LaminateError):
    """Projection onto a Hamiltonian level failed."""


class AssemblyError(LaminateError, ValueError):
    """A boundary-value problem could not be assembled (shape/mesh mismatch)."""


class SolverError(LaminateError):
    """Newton iteration failed.

    ``best`` carries the best iterate seen, ``condition`` a condition estimate
    when the linearization was singular.
    """

    def __init__(self, message, best=None, condition=None):
        super().__init__(message)
        self.best = best
        self.condition = condition


class SeedError(LaminateError):
    """Construction of a starting periodic orbit failed."""
