"""Fundamental kernels of the Wick-rotated nonlocal equation.

The kernel K^H_τ has characteristic function exp(−σ²p²τ H̃(p)/2) and solves

    ∂τ u = (σ²/2) ∂²(H ∗ u),

whose Kramers-Moyal form is the (truncated) quantum Fokker-Planck generator.
Kernels are obtained by inverting the symbol on an origin-centred periodic
grid; `solve_kramers_moyal` integrates the truncated derivative series with
finite differences as an independent cross-check.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Any

import numpy as np
from scipy import sparse
from sympy.calculus.finite_diff import finite_diff_weights

from .const import (
    BOUNDARY_MASS_TOL,
    DEFAULT_N_POINTS,
    GRID_SAFETY,
    GRID_WIDTH_FACTOR,
    IMAGINARY_RESIDUE_TOL,
    KERNEL_MASS_TOL,
    KM_BOUNDARY_FROZEN,
    KM_BOUNDARY_ONE_SIDED,
    KM_CFL,
    KM_GROWTH_LIMIT,
    KM_MAX_ORDER,
    KM_STENCIL_ACCURACY,
    LOGGER,
)
from .coordinator import SweepCoordinator
from .data import (
    KernelSidecar,
    read_two_column_csv,
    write_json,
    write_two_column_csv,
)
from .exceptions import (
    BoundaryMassError,
    GridDomainError,
    GridMismatchError,
    InvalidParameterError,
    NumericalInstabilityError,
)
from .nonlocality import NonlocalityFunction
from .qsde_algebra import BackwardPDE


def _check_positive(name: str, value: float) -> float:
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise InvalidParameterError(f"{name} must be positive and finite, got {value}")
    return value


@dataclass(frozen=True)
class FourierGrid:
    """n_points cells of width `spacing` on [−L/2, L/2)."""

    n_points: int
    spacing: float

    def __post_init__(self) -> None:
        n = self.n_points
        if not (isinstance(n, int) and n > 0 and n & (n - 1) == 0):
            raise InvalidParameterError(f"grid size must be a power of two, got {n}")
        _check_positive("grid spacing", self.spacing)

    @classmethod
    def from_length(cls, n_points: int, length: float) -> FourierGrid:
        """Grid of n_points cells covering a domain of the given length."""
        return cls(n_points, _check_positive("domain length", length) / n_points)

    @classmethod
    def default_for(
        cls, sigma: float, tau: float, eps: float = 0.0, n_points: int = DEFAULT_N_POINTS
    ) -> FourierGrid:
        """L = 20·max(σ√τ, ε)·1.5."""
        width = max(float(sigma) * math.sqrt(float(tau)), float(eps))
        return cls.from_length(n_points, GRID_WIDTH_FACTOR * width * GRID_SAFETY)

    @property
    def length(self) -> float:
        """Domain length L."""
        return self.n_points * self.spacing

    @cached_property
    def x(self) -> np.ndarray:
        """Cell positions, x = 0 at index n/2."""
        x = (np.arange(self.n_points) - self.n_points // 2) * self.spacing
        x.setflags(write=False)
        return x

    @cached_property
    def frequencies(self) -> np.ndarray:
        """Angular frequencies in FFT order, spacing 2π/L."""
        p = 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.spacing)
        p.setflags(write=False)
        return p

    @cached_property
    def offsets(self) -> np.ndarray:
        """Displacements in FFT order: 0, Δx, ..., −Δx."""
        offsets = np.fft.ifftshift(self.x)
        offsets.setflags(write=False)
        return offsets

    def to_dict(self) -> dict[str, Any]:
        """JSON form."""
        return {"n": self.n_points, "L": self.length}


def _check_same_grid(expected: FourierGrid, actual: FourierGrid) -> None:
    if expected != actual:
        raise GridMismatchError(
            f"grid mismatch: {expected.n_points}×{expected.spacing!r} vs "
            f"{actual.n_points}×{actual.spacing!r}"
        )


@dataclass(frozen=True, eq=False)
class SolutionSlice:
    """u(x, τ) on a grid."""

    grid: FourierGrid
    values: np.ndarray
    tau: float = 0.0

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_points,):
            raise GridMismatchError(
                f"expected {self.grid.n_points} values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError("solution contains NaN or infinite values")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: FourierGrid, fn: Any, tau: float = 0.0) -> SolutionSlice:
        """Sample fn(x) on the grid."""
        return cls(grid, np.asarray(fn(grid.x), dtype=float), tau)

    @classmethod
    def from_csv(cls, path: str | Path, tau: float = 0.0) -> SolutionSlice:
        """Load (x, value) rows laid out on an origin-centred power-of-two grid."""
        x, values = read_two_column_csv(path)
        spacing = float(x[1] - x[0])
        grid = FourierGrid(len(x), spacing)
        if not np.allclose(x, grid.x, rtol=0.0, atol=1e-9 * grid.length):
            raise GridMismatchError(
                f"{path} is not sampled on an origin-centred uniform grid"
            )
        return cls(grid, values, tau)

    def to_csv(self, path: str | Path) -> None:
        """Write (x, value) rows."""
        write_two_column_csv(path, self.grid.x, self.values)

    def mass(self) -> float:
        """∑ u Δx."""
        return float(np.sum(self.values) * self.grid.spacing)


def sup_norm_distance(a: SolutionSlice, b: SolutionSlice) -> float:
    """max |a − b| over a shared grid."""
    _check_same_grid(a.grid, b.grid)
    return float(np.max(np.abs(a.values - b.values)))


@dataclass(frozen=True, eq=False)
class KernelSample:
    """K^H_τ sampled on a grid."""

    grid: FourierGrid
    values: np.ndarray
    sigma: float
    tau: float
    nonlocality: NonlocalityFunction

    def mass(self) -> float:
        """∑ K Δx."""
        return float(np.sum(self.values) * self.grid.spacing)

    def moment(self, k: int) -> float:
        """∫ x^k K dx."""
        return kernel_moment(self, k)

    def negative_mass(self) -> float:
        """∑ max(−K, 0) Δx; nonzero for quasi-probability kernels."""
        return float(np.sum(np.clip(-self.values, 0.0, None)) * self.grid.spacing)

    def excess_kurtosis(self) -> float:
        """Central μ4/μ2² − 3."""
        m1, m2, m3, m4 = (kernel_moment(self, k) for k in range(1, 5))
        var = m2 - m1**2
        central4 = m4 - 4 * m1 * m3 + 6 * m1**2 * m2 - 3 * m1**4
        return central4 / var**2 - 3.0

    def sidecar(self) -> KernelSidecar:
        """Metadata record."""
        return KernelSidecar(
            sigma=self.sigma,
            tau=self.tau,
            H=self.nonlocality.to_dict(),
            n=self.grid.n_points,
            L=self.grid.length,
        )

    def to_csv(self, path: str | Path) -> Path:
        """Write (x, value) rows and the JSON sidecar; returns the sidecar path."""
        path = Path(path)
        sidecar_path = path.with_suffix(".json")
        write_two_column_csv(path, self.grid.x, self.values)
        write_json(sidecar_path, self.sidecar().to_dict())
        return sidecar_path


def kernel_symbol(
    H: NonlocalityFunction, sigma: float, tau: float, p: np.ndarray
) -> np.ndarray:
    """exp(−σ²p²τ H̃(p)/2)."""
    p = np.asarray(p, dtype=float)
    return np.exp(-0.5 * sigma**2 * tau * p**2 * np.asarray(H.char_fn(p)))


def _grid_symbol(
    H: NonlocalityFunction, sigma: float, tau: float, grid: FourierGrid
) -> np.ndarray:
    symbol = kernel_symbol(H, sigma, tau, grid.frequencies)
    # the Nyquist bin has no conjugate partner
    nyquist = grid.n_points // 2
    symbol[nyquist] = symbol[nyquist].real
    return symbol


def _check_boundary(values: np.ndarray, what: str) -> None:
    peak = float(np.max(np.abs(values)))
    edge = float(max(abs(values[0]), abs(values[-1])))
    if edge > BOUNDARY_MASS_TOL * peak:
        raise BoundaryMassError(
            f"{what} has not decayed at the domain boundary "
            f"(edge/peak = {edge / peak:.3g}); increase the domain length L"
        )


def _invert_symbol(symbol: np.ndarray, grid: FourierGrid) -> np.ndarray:
    raw = np.fft.fftshift(np.fft.fft(symbol)) / grid.length
    peak = float(np.max(np.abs(raw.real)))
    residue = float(np.max(np.abs(raw.imag)))
    if residue > IMAGINARY_RESIDUE_TOL * max(peak, 1.0):
        LOGGER.warning("kernel imaginary residue %.3g exceeds tolerance", residue)
    return raw.real


def build_kernel(
    H: NonlocalityFunction, sigma: float, tau: float, grid: FourierGrid
) -> KernelSample:
    """Invert the kernel symbol on the grid and renormalize to unit mass."""
    sigma = _check_positive("sigma", sigma)
    tau = _check_positive("tau", tau)
    values = _invert_symbol(_grid_symbol(H, sigma, tau, grid), grid)
    mass = float(np.sum(values) * grid.spacing)
    if abs(mass - 1.0) > KERNEL_MASS_TOL:
        LOGGER.debug("renormalizing kernel with grid mass %.12g", mass)
    values = values / mass
    _check_boundary(values, f"{H.kind} kernel")
    LOGGER.debug(
        "built %s kernel sigma=%g tau=%g on n=%d L=%g",
        H.kind,
        sigma,
        tau,
        grid.n_points,
        grid.length,
    )
    return KernelSample(grid, values, sigma, tau, H)


def kernel_moment(K: KernelSample, k: int) -> float:
    """∑ x^k K(x) Δx."""
    if k < 0:
        raise InvalidParameterError(f"moment order must be nonnegative, got {k}")
    if k == 0:
        return 1.0
    integrand = K.grid.x**k * K.values
    scale = float(np.sum(np.abs(integrand)))
    edge = float(abs(integrand[0]) + abs(integrand[-1]))
    if scale > 0 and edge > BOUNDARY_MASS_TOL * scale:
        LOGGER.warning(
            "moment %d: boundary cells carry %.3g of the integrand", k, edge / scale
        )
    return float(np.sum(integrand) * K.grid.spacing)


def propagate(
    u0: SolutionSlice,
    H: NonlocalityFunction,
    sigma: float,
    tau: float,
    grid: FourierGrid | None = None,
) -> SolutionSlice:
    """u(·, τ0 + τ) = K^H_τ ∗ u0 with periodic wraparound."""
    if grid is not None:
        _check_same_grid(grid, u0.grid)
    grid = u0.grid
    sigma = _check_positive("sigma", sigma)
    tau = _check_positive("tau", tau)
    symbol = _grid_symbol(H, sigma, tau, grid)
    _check_boundary(_invert_symbol(symbol, grid), f"{H.kind} kernel")
    # convolution picks up the symbol at −p
    multiplier = np.roll(symbol[::-1], 1)
    values = np.fft.ifft(multiplier * np.fft.fft(u0.values)).real
    return SolutionSlice(grid, values, u0.tau + tau)


def excess_kurtosis_sweep(
    H: NonlocalityFunction,
    sigma: float,
    taus: Sequence[float],
    n_points: int = DEFAULT_N_POINTS,
    jobs: int = 1,
) -> list[float]:
    """Excess kurtosis of K^H_τ for each τ, each on its default grid."""

    def _kurtosis(tau: float) -> float:
        grid = FourierGrid.default_for(sigma, tau, H.length_scale, n_points)
        return build_kernel(H, sigma, tau, grid).excess_kurtosis()

    return SweepCoordinator(jobs=jobs, name="kurtosis").map(_kurtosis, list(taus))


@lru_cache(maxsize=32)
def central_stencil(order: int, accuracy: int = KM_STENCIL_ACCURACY) -> tuple[float, ...]:
    """Central difference weights (unit spacing) for the order-th derivative."""
    half_width = (2 * ((order + 1) // 2) - 1 + accuracy) // 2
    nodes = list(range(-half_width, half_width + 1))
    weights = finite_diff_weights(order, nodes, 0)[order][-1]
    return tuple(float(w) for w in weights)


@lru_cache(maxsize=256)
def one_sided_stencil(
    order: int, first: int, accuracy: int = KM_STENCIL_ACCURACY
) -> tuple[float, ...]:
    """Off-centred weights on the nodes first, first + 1, ... (unit spacing).

    One node wider than the central stencil, so the accuracy is kept.
    """
    width = len(central_stencil(order, accuracy)) + 1
    nodes = list(range(first, first + width))
    weights = finite_diff_weights(order, nodes, 0)[order][-1]
    return tuple(float(w) for w in weights)


def boundary_band(coefficients: Sequence[float], accuracy: int = KM_STENCIL_ACCURACY) -> int:
    """Cells at each edge that the widest active central stencil cannot reach across."""
    widths = [
        len(central_stencil(k, accuracy)) // 2
        for k, b_k in enumerate(coefficients, start=2)
        if b_k != 0.0
    ]
    return max(widths, default=0)


def kramers_moyal_operator(
    grid: FourierGrid,
    coefficients: Sequence[float],
    boundary: str = KM_BOUNDARY_ONE_SIDED,
) -> sparse.csr_matrix:
    """Σ_k b_k ∂^k for k = 2..N as a banded matrix.

    Interior rows use central stencils. In the boundary band, `one_sided`
    rows switch to off-centred stencils that stay inside the grid; `frozen`
    rows are zero, which holds those cells at their current values.
    """
    if boundary not in (KM_BOUNDARY_ONE_SIDED, KM_BOUNDARY_FROZEN):
        raise InvalidParameterError(f"unknown boundary treatment {boundary!r}")
    n = grid.n_points
    band = boundary_band(coefficients)
    if 2 * band + 2 > n:
        raise GridDomainError(f"{n} grid points cannot hold a boundary band of {band}")

    interior = np.ones(n)
    interior[:band] = 0.0
    interior[n - band :] = 0.0
    rows: list[int] = []
    cols: list[int] = []
    data: list[float] = []
    operator = sparse.csr_matrix((n, n))
    for k, b_k in enumerate(coefficients, start=2):
        if b_k == 0.0:
            continue
        scale = b_k / grid.spacing**k
        weights = central_stencil(k)
        half_width = len(weights) // 2
        offsets = list(range(-half_width, half_width + 1))
        diagonals = [np.full(n - abs(o), w) for o, w in zip(offsets, weights)]
        operator = operator + scale * sparse.diags(diagonals, offsets, shape=(n, n), format="csr")
        if boundary != KM_BOUNDARY_ONE_SIDED:
            continue
        width = len(weights) + 1
        for i in [*range(band), *range(n - band, n)]:
            if half_width <= i < n - half_width:
                # the central stencil still fits; keep it
                rows.extend([i] * len(weights))
                cols.extend(i + o for o in offsets)
                data.extend(scale * w for w in weights)
                continue
            start = min(max(i - half_width, 0), n - width)
            rows.extend([i] * width)
            cols.extend(range(start, start + width))
            data.extend(scale * w for w in one_sided_stencil(k, start - i))

    operator = sparse.diags(interior) @ operator
    if rows:
        operator = operator + sparse.csr_matrix((data, (rows, cols)), shape=(n, n))
    return operator.tocsr()


def stable_time_step(grid: FourierGrid, sigma: float, eps: float, order: int) -> float:
    """c·Δx²/σ², scaled down by (1 + |ε|/Δx)^(N−2)."""
    dx = grid.spacing
    return KM_CFL * dx**2 / sigma**2 / (1.0 + abs(eps) / dx) ** (order - 2)


def solve_kramers_moyal(
    u0: SolutionSlice,
    pde: BackwardPDE,
    sigma: float,
    eps: float,
    tau: float,
    n_steps: int | None = None,
) -> SolutionSlice:
    """Integrate ∂τ u = Σ b_k ∂^k u with fourth-order Runge-Kutta.

    Cells in the boundary band keep their terminal values.
    """
    if pde.order > KM_MAX_ORDER:
        raise InvalidParameterError(
            f"Kramers-Moyal truncation {pde.order} exceeds {KM_MAX_ORDER}"
        )
    sigma = _check_positive("sigma", sigma)
    tau = _check_positive("tau", tau)
    grid = u0.grid
    operator = kramers_moyal_operator(
        grid, pde.numeric_coefficients(sigma, float(eps)), boundary=KM_BOUNDARY_FROZEN
    )

    steps = math.ceil(tau / stable_time_step(grid, sigma, float(eps), pde.order))
    if n_steps is not None:
        steps = max(steps, n_steps)
    dt = tau / steps
    LOGGER.debug("Kramers-Moyal order %d: %d steps of %.3g", pde.order, steps, dt)

    u = u0.values.copy()
    size = float(np.max(np.abs(u)))
    for step in range(steps):
        k1 = operator @ u
        k2 = operator @ (u + 0.5 * dt * k1)
        k3 = operator @ (u + 0.5 * dt * k2)
        k4 = operator @ (u + dt * k3)
        u = u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        new_size = float(np.max(np.abs(u)))
        if not math.isfinite(new_size) or (
            size > 0.0 and new_size > KM_GROWTH_LIMIT * size
        ):
            raise NumericalInstabilityError(
                f"Kramers-Moyal integration blew up at step {step + 1} of {steps}"
            )
        size = new_size
    return SolutionSlice(grid, u, u0.tau + tau)
