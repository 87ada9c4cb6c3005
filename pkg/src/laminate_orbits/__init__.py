"""Periodic laminate orbits of a fast-slow Hamiltonian system: computation and continuation."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    AssemblyError,
    ChartError,
    DomainError,
    IntegrationError,
    LaminateError,
    ProjectionError,
    ResourceError,
    SeedError,
    SolverError,
)
from .model import ParamSet  # noqa: F401
