"""
Quantum Kolmogorov equations for nonlocal option pricing.

Derives the backward PDE of a quantum stochastic process from the Ito table,
builds the fundamental kernels of the nonlocal heat equation, reconciles their
moments, and checks the noncommutative operator algebra and the gauge
translation property on grids.

Run `python -m quantum_kolmogorov --help` for the command line.
"""

from __future__ import annotations

from .exceptions import (
    BoundaryMassError,
    GridDomainError,
    InvalidParameterError,
    NumericalInstabilityError,
    QuantumKolmogorovError,
)
from .kernel_engine import FourierGrid, SolutionSlice, build_kernel, propagate
from .nonlocality import Dirac, Gaussian, Tabulated, Triangular
from .qsde_algebra import derive_backward_pde, derive_fokker_planck

__all__ = [
    "BoundaryMassError",
    "Dirac",
    "FourierGrid",
    "Gaussian",
    "GridDomainError",
    "InvalidParameterError",
    "NumericalInstabilityError",
    "QuantumKolmogorovError",
    "SolutionSlice",
    "Tabulated",
    "Triangular",
    "build_kernel",
    "derive_backward_pde",
    "derive_fokker_planck",
    "propagate",
]
