"""Cumulants of counting statistics in Markovian open quantum systems.

Submodules
----------
hilbert       dense operators on composite spaces
liouville     Lindblad generators, tilted generators, steady states
cumulants     biased-matrix hierarchy and scaled cumulants
ldf           theta(s) from the dominant eigenvalue of the tilted generator
gaussian      phase-space (Lyapunov/Riccati) backend for linear networks
trajectories  quantum-jump Monte Carlo
models        model zoo and Kerr mean field
cli           batch command-line interface
"""
from .cumulants import cumulants, cumulants_per_fixed_point, fano, fano_standard, solve_hierarchy
from .errors import (
    ConfigError,
    ConvergenceError,
    DimensionCapError,
    DimensionError,
    FullCountError,
    InstabilityError,
    UndefinedFanoError,
)
from .hilbert import DensityMatrix, Operator, SpaceLayout
from .liouville import Channel, LindbladModel, biased_liouvillian, build_liouvillian, steady_states

__version__ = "0.1.0"

__all__ = [
    "Channel",
    "ConfigError",
    "ConvergenceError",
    "DensityMatrix",
    "DimensionCapError",
    "DimensionError",
    "FullCountError",
    "InstabilityError",
    "LindbladModel",
    "Operator",
    "SpaceLayout",
    "UndefinedFanoError",
    "biased_liouvillian",
    "build_liouvillian",
    "cumulants",
    "cumulants_per_fixed_point",
    "fano",
    "fano_standard",
    "solve_hierarchy",
    "steady_states",
]
