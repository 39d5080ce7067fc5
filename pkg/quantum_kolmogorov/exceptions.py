"""Errors raised by the quantum_kolmogorov library."""

from __future__ import annotations


class QuantumKolmogorovError(Exception):
    """Exception to indicate a general library error."""


class InvalidParameterError(QuantumKolmogorovError, ValueError):
    """Exception to indicate a rejected input parameter."""


class MomentsUnavailableError(InvalidParameterError):
    """Exception to indicate a nonlocality function cannot supply the requested moments."""


class CharacteristicFunctionUnavailableError(InvalidParameterError):
    """Exception to indicate a nonlocality function has no characteristic function."""


class GridDomainError(QuantumKolmogorovError):
    """Exception to indicate a grid or domain failure."""


class BoundaryMassError(GridDomainError):
    """Exception to indicate a kernel that has not decayed at the grid boundary."""


class GridMismatchError(GridDomainError):
    """Exception to indicate operands living on different grids."""


class LogDomainError(GridDomainError):
    """Exception to indicate a velocity outside the logarithm's domain."""


class NumericalInstabilityError(QuantumKolmogorovError):
    """Exception to indicate a blown-up time integration."""
