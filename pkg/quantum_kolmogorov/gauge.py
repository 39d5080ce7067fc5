"""Gauge transformations of the translation Hamiltonian.

For ε > 0 the Hamiltonian H(p) = (σ²/ε²)(e^{εp} − εp − 1) is not quadratic,
and shifting the momentum by a gauge potential v(x) no longer amounts to
shifting the velocity by σ²v(x). This module evaluates the Legendre pair
exactly and measures how far the classical translation property fails.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np
from scipy.interpolate import CubicSpline

from .const import LOGGER
from .coordinator import SweepCoordinator
from .data import ViolationReport, read_two_column_csv
from .exceptions import GridDomainError, InvalidParameterError, LogDomainError

# below these |z| the closed forms lose digits to cancellation
_SERIES_CUTOFF = 1e-2
_RATIO_CUTOFF = 1e-8


def _scalar_or_array(value: np.ndarray) -> float | np.ndarray:
    return float(value) if np.ndim(value) == 0 else value


def _phi1(z: np.ndarray) -> np.ndarray:
    """(e^z − 1)/z."""
    small = np.abs(z) < _RATIO_CUTOFF
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 + 0.5 * z, np.expm1(safe) / safe)


def _phi2(z: np.ndarray) -> np.ndarray:
    """(e^z − 1 − z)/z²."""
    small = np.abs(z) < _SERIES_CUTOFF
    safe = np.where(small, 1.0, z)
    series = 1 / 2 + z * (1 / 6 + z * (1 / 24 + z * (1 / 120 + z * (1 / 720 + z / 5040))))
    return np.where(small, series, (np.expm1(safe) - safe) / safe**2)


def _log1p_ratio(z: np.ndarray) -> np.ndarray:
    """log(1 + z)/z."""
    small = np.abs(z) < _RATIO_CUTOFF
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 - 0.5 * z, np.log1p(safe) / safe)


@dataclass(frozen=True, eq=False)
class GaugeConfig:
    """σ, ε and the gauge potential v = ∂_x Λ."""

    sigma: float
    eps: float
    v: CubicSpline | None = None

    def __post_init__(self) -> None:
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise InvalidParameterError(f"sigma must be positive, got {self.sigma}")
        if not (self.eps >= 0 and math.isfinite(self.eps)):
            raise InvalidParameterError(f"eps must be nonnegative, got {self.eps}")
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "eps", float(self.eps))

    @classmethod
    def from_samples(
        cls, x: Sequence[float], values: Sequence[float], sigma: float, eps: float
    ) -> GaugeConfig:
        """Cubic interpolation through (x, v) samples."""
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError("gauge potential must be finite")
        try:
            spline = CubicSpline(x, values, extrapolate=False)
        except ValueError as exception:
            raise InvalidParameterError(f"bad gauge potential samples: {exception}") from exception
        return cls(sigma, eps, spline)

    @classmethod
    def from_function(
        cls,
        fn: Callable[[np.ndarray], Any],
        sigma: float,
        eps: float,
        x_range: tuple[float, float] = (-5.0, 5.0),
        n_samples: int = 1001,
    ) -> GaugeConfig:
        """Sample fn on an even grid over x_range."""
        x = np.linspace(*x_range, n_samples)
        return cls.from_samples(x, np.broadcast_to(fn(x), x.shape), sigma, eps)

    @classmethod
    def from_csv(cls, path: str | Path, sigma: float, eps: float) -> GaugeConfig:
        """Load v from two-column (x, v) CSV."""
        x, values = read_two_column_csv(path)
        return cls.from_samples(x, values, sigma, eps)

    @property
    def is_classical(self) -> bool:
        """ε = 0: the quadratic Hamiltonian."""
        return self.eps == 0.0

    @property
    def x_range(self) -> tuple[float, float]:
        """Interval on which v is defined."""
        if self.v is None:
            return (-math.inf, math.inf)
        return (float(self.v.x[0]), float(self.v.x[-1]))

    def with_eps(self, eps: float) -> GaugeConfig:
        """Same σ and v at another ε."""
        return replace(self, eps=eps)

    def without_potential(self) -> GaugeConfig:
        """Same σ and ε with v ≡ 0."""
        return replace(self, v=None)

    def potential(self, x: Any) -> np.ndarray:
        """v(x); zero when no potential is set."""
        x = np.asarray(x, dtype=float)
        if self.v is None:
            return np.zeros_like(x)
        values = self.v(x)
        if np.any(np.isnan(values)):
            low, high = self.x_range
            raise GridDomainError(f"x outside the gauge potential range [{low}, {high}]")
        return values


def hamiltonian(p: Any, sigma: float, eps: float) -> float | np.ndarray:
    """(σ²/ε²)(e^{εp} − εp − 1); σ²p²/2 at ε = 0."""
    p = np.asarray(p, dtype=float)
    return _scalar_or_array(sigma**2 * p**2 * _phi2(eps * p))


def velocity_from_momentum(p: Any, x: Any, cfg: GaugeConfig) -> float | np.ndarray:
    """ẋ = ∂H/∂p at p − v(x), i.e. (σ²/ε)(e^{−εv}e^{εp} − 1)."""
    q = np.asarray(p, dtype=float) - cfg.potential(x)
    return _scalar_or_array(cfg.sigma**2 * q * _phi1(cfg.eps * q))


def canonical_momentum(xdot: Any, x: Any, cfg: GaugeConfig) -> float | np.ndarray:
    """(1/ε)·log(1 + εẋ/σ²) + v(x), the inverse of velocity_from_momentum."""
    xdot = np.asarray(xdot, dtype=float)
    z = cfg.eps * xdot / cfg.sigma**2
    if np.any(z <= -1.0):
        bound = -cfg.sigma**2 / cfg.eps
        raise LogDomainError(
            f"velocity must exceed −σ²/ε = {bound!r} (ε·ẋ/σ² > −1)"
        )
    return _scalar_or_array(xdot / cfg.sigma**2 * _log1p_ratio(z) + cfg.potential(x))


def lagrangian(xdot: Any, x: Any, cfg: GaugeConfig) -> float | np.ndarray:
    """Legendre transform p·ẋ − H(p − v(x)) at the canonical momentum."""
    xdot = np.asarray(xdot, dtype=float)
    p = np.asarray(canonical_momentum(xdot, x, cfg))
    q = p - cfg.potential(x)
    return _scalar_or_array(p * xdot - cfg.sigma**2 * q**2 * _phi2(cfg.eps * q))


def transformed_lagrangian(xdot: Any, x: Any, cfg: GaugeConfig) -> float | np.ndarray:
    """L′(ẋ′, x): the v ≡ 0 Lagrangian at the velocity the same momentum carries.

    In the classical case this is (ẋ′ + σ²v(x))²/(2σ²).
    """
    bare = cfg.without_potential()
    p = canonical_momentum(xdot, x, cfg)
    return lagrangian(velocity_from_momentum(p, x, bare), x, bare)


@dataclass(frozen=True)
class PhasePoint:
    """(x, p, ẋ) linked by the Legendre map."""

    x: float
    p: float
    xdot: float

    @classmethod
    def from_momentum(cls, p: float, x: float, cfg: GaugeConfig) -> PhasePoint:
        """Complete (x, p) with its velocity."""
        return cls(x, p, float(velocity_from_momentum(p, x, cfg)))

    @classmethod
    def from_velocity(cls, xdot: float, x: float, cfg: GaugeConfig) -> PhasePoint:
        """Complete (x, ẋ) with its canonical momentum."""
        return cls(x, float(canonical_momentum(xdot, x, cfg)), xdot)


@dataclass(frozen=True)
class PhaseGrid:
    """Tensor grid of velocities and positions."""

    xdot: tuple[float, float, int]
    x: tuple[float, float, int]

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """(ẋ, x) arrays of shape (n_xdot, n_x)."""
        return np.meshgrid(np.linspace(*self.xdot), np.linspace(*self.x), indexing="ij")

    def to_dict(self) -> dict[str, Any]:
        """JSON form."""
        return {"xdot": list(self.xdot), "x": list(self.x)}


def translation_violation(cfg: GaugeConfig, grid: PhaseGrid) -> float:
    """sup |L′(ẋ, x) − L(ẋ + σ²v(x))| over the grid, L the v ≡ 0 Lagrangian."""
    xdot, x = grid.mesh()
    shifted = xdot + cfg.sigma**2 * cfg.potential(x)
    gap = transformed_lagrangian(xdot, x, cfg) - lagrangian(shifted, x, cfg.without_potential())
    return float(np.max(np.abs(gap)))


def violation_sweep(
    cfg: GaugeConfig, eps_values: Sequence[float], grid: PhaseGrid, jobs: int = 1
) -> list[ViolationReport]:
    """translation_violation at each ε with σ and v held fixed."""

    def _violation(eps: float) -> ViolationReport:
        value = translation_violation(cfg.with_eps(float(eps)), grid)
        LOGGER.debug("eps=%g: sup violation %.6g", eps, value)
        return ViolationReport(eps=float(eps), sup_violation=value, grid=grid.to_dict())

    return SweepCoordinator(jobs=jobs, name="gauge").map(_violation, list(eps_values))
