"""Nonlocality functions H(y): densities, characteristic functions and moments.

Every admissible H has finite moments of all orders. The distinguished
triangular density 2(ε − y)/ε² on [0, ε] has moments 2ε^k/((k+1)(k+2)), which
is exactly the sequence that turns the Kramers-Moyal form of the nonlocal
equation into the quantum Fokker-Planck equation.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational, Real
from pathlib import Path
from typing import Any, ClassVar

import numpy as np
from scipy.integrate import trapezoid

from .const import (
    DENSITY_NORMALIZATION_TOL,
    KIND_DIRAC,
    KIND_GAUSSIAN,
    KIND_MOMENT_ONLY,
    KIND_SELF_CONVOLUTION,
    KIND_TABULATED,
    KIND_TRIANGULAR,
    LOGGER,
)
from .data import read_two_column_csv
from .exceptions import (
    CharacteristicFunctionUnavailableError,
    InvalidParameterError,
    MomentsUnavailableError,
)
from .qsde_algebra import COEFF_RING, CoeffPoly, coeff_poly

Scalar = float | Fraction

# |pε| below which the triangular transform is summed as a series
_SERIES_CUTOFF = 0.1
_SERIES_TERMS = 16
_CHAR_FN_CHUNK = 256


def _double_factorial(k: int) -> int:
    return math.prod(range(k, 0, -2))


def _check_length_scale(eps: Scalar) -> None:
    if not (isinstance(eps, Real) and eps > 0 and math.isfinite(eps)):
        raise InvalidParameterError(f"length scale must be positive and finite, got {eps}")


def _char_fn_output(p: Any, values: np.ndarray) -> complex | np.ndarray:
    if np.ndim(p) == 0:
        return complex(values.reshape(()))
    return values


@dataclass(frozen=True)
class MomentSequence:
    """Raw moments a_0..a_N of a nonlocality function."""

    values: tuple[Scalar, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise InvalidParameterError("a moment sequence needs at least a_0")
        a0 = self.values[0]
        if isinstance(a0, (int, Fraction)):
            ok = a0 == 1
        else:
            ok = abs(float(a0) - 1.0) <= DENSITY_NORMALIZATION_TOL
        if not ok:
            raise InvalidParameterError(f"a_0 must equal 1, got {a0}")

    @property
    def order(self) -> int:
        """Highest stored moment order N."""
        return len(self.values) - 1

    def __getitem__(self, k: int) -> Scalar:
        return self.values[k]

    def __len__(self) -> int:
        return len(self.values)

    def truncate(self, N: int) -> MomentSequence:
        """Keep a_0..a_N."""
        if N > self.order:
            raise MomentsUnavailableError(
                f"moments unavailable beyond order {self.order} (requested {N})"
            )
        return MomentSequence(self.values[: N + 1])

    def as_floats(self) -> np.ndarray:
        """The moments as a float array."""
        return np.array([float(value) for value in self.values])

    @property
    def mean(self) -> Scalar:
        """First moment."""
        return self.values[1] if self.order >= 1 else 0

    @property
    def variance(self) -> Scalar:
        """Second central moment."""
        if self.order < 2:
            raise MomentsUnavailableError("variance needs moments up to order 2")
        return self.values[2] - self.values[1] ** 2

    def binomial_convolution(self, other: MomentSequence) -> MomentSequence:
        """Moments of the convolution of the two underlying distributions."""
        N = min(self.order, other.order)
        return MomentSequence(
            tuple(
                sum(
                    math.comb(n, k) * self.values[k] * other.values[n - k]
                    for k in range(n + 1)
                )
                for n in range(N + 1)
            )
        )

    def hankel_matrix(self) -> np.ndarray:
        """[a_{i+j}] for 0 ≤ i, j ≤ ⌊N/2⌋ after standardizing the scale.

        Moments of widely different magnitudes make the raw matrix
        ill-conditioned, so a_k is divided by s^k with s² = a_2 (when positive).
        """
        moments = self.as_floats()
        if self.order >= 2 and moments[2] > 0:
            moments = moments / np.sqrt(moments[2]) ** np.arange(len(moments))
        r = np.arange(self.order // 2 + 1)
        return moments[r[:, None] + r[None, :]]

    def is_positive_semidefinite(self, rel_tol: float = 1e-10) -> bool:
        """Hankel test for realizability by a genuine distribution."""
        eigvals = np.linalg.eigvalsh(self.hankel_matrix())
        return bool(eigvals.min() >= -rel_tol * max(eigvals.max(), 1.0))


class NonlocalityFunction(ABC):
    """A probability distribution H convolved into the momentum operator."""

    kind: ClassVar[str]

    @abstractmethod
    def moments(self, N: int) -> MomentSequence:
        """a_0..a_N."""

    def char_fn(self, p: Any) -> complex | np.ndarray:
        """H̃(p) = ∫ e^{ipy} H(y) dy, vectorized over p."""
        raise CharacteristicFunctionUnavailableError(
            f"characteristic function unavailable for {self.kind} nonlocality"
        )

    def density(self, y: Any) -> np.ndarray:
        """H(y) sampled at y."""
        raise InvalidParameterError(f"{self.kind} nonlocality has no density")

    @property
    def has_char_fn(self) -> bool:
        """Whether char_fn can be evaluated."""
        return True

    @property
    def has_density(self) -> bool:
        """Whether density can be evaluated."""
        return False

    @property
    def length_scale(self) -> float:
        """Width used for grid sizing."""
        return 0.0

    def to_dict(self) -> dict[str, Any]:
        """JSON form used in sidecars and fixtures."""
        return {"kind": self.kind}


@dataclass(frozen=True)
class Dirac(NonlocalityFunction):
    """Point mass at the origin; the local (classical) limit."""

    kind: ClassVar[str] = KIND_DIRAC

    def moments(self, N: int) -> MomentSequence:
        return MomentSequence((1,) + (0,) * N)

    def char_fn(self, p: Any) -> complex | np.ndarray:
        return _char_fn_output(p, np.ones(np.shape(p), dtype=complex))


@dataclass(frozen=True)
class Gaussian(NonlocalityFunction):
    """Centred normal distribution with standard deviation eps."""

    eps: Scalar
    kind: ClassVar[str] = KIND_GAUSSIAN

    def __post_init__(self) -> None:
        _check_length_scale(self.eps)

    def moments(self, N: int) -> MomentSequence:
        return MomentSequence(
            tuple(
                self.eps**k * _double_factorial(k - 1) if k % 2 == 0 else 0
                for k in range(N + 1)
            )
        )

    def char_fn(self, p: Any) -> complex | np.ndarray:
        eps = float(self.eps)
        p = np.asarray(p, dtype=float)
        return _char_fn_output(p, np.exp(-0.5 * (eps * p) ** 2).astype(complex))

    def density(self, y: Any) -> np.ndarray:
        eps = float(self.eps)
        y = np.asarray(y, dtype=float)
        return np.exp(-0.5 * (y / eps) ** 2) / (eps * math.sqrt(2 * math.pi))

    @property
    def has_density(self) -> bool:
        return True

    @property
    def length_scale(self) -> float:
        return float(self.eps)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "eps": float(self.eps)}


@dataclass(frozen=True)
class Triangular(NonlocalityFunction):
    """H(y) = 2(ε − y)/ε² on [0, ε]."""

    eps: Scalar
    kind: ClassVar[str] = KIND_TRIANGULAR

    def __post_init__(self) -> None:
        _check_length_scale(self.eps)

    def moments(self, N: int) -> MomentSequence:
        return MomentSequence(
            tuple(Fraction(2, (k + 1) * (k + 2)) * self.eps**k for k in range(N + 1))
        )

    def char_fn(self, p: Any) -> complex | np.ndarray:
        z = float(self.eps) * np.atleast_1d(np.asarray(p, dtype=float)).ravel()
        out = np.empty(z.shape, dtype=complex)
        small = np.abs(z) < _SERIES_CUTOFF
        iz = 1j * z[small]
        series = np.zeros(iz.shape, dtype=complex)
        term = np.ones(iz.shape, dtype=complex)
        for k in range(_SERIES_TERMS):
            series += 2.0 / ((k + 1) * (k + 2)) * term
            term = term * iz / (k + 1)
        out[small] = series
        zl = z[~small]
        out[~small] = 2.0 * (1.0 + 1j * zl - np.exp(1j * zl)) / zl**2
        return _char_fn_output(p, out.reshape(np.shape(p)))

    def density(self, y: Any) -> np.ndarray:
        eps = float(self.eps)
        y = np.asarray(y, dtype=float)
        inside = (y >= 0) & (y <= eps)
        return np.where(inside, 2.0 * (eps - y) / eps**2, 0.0)

    @property
    def has_density(self) -> bool:
        return True

    @property
    def length_scale(self) -> float:
        return float(self.eps)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "eps": float(self.eps)}


@dataclass(frozen=True, eq=False)
class Tabulated(NonlocalityFunction):
    """A density given by samples on a strictly increasing grid."""

    grid: np.ndarray
    values: np.ndarray
    source: str | None = None
    kind: ClassVar[str] = KIND_TABULATED

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or len(grid) < 2:
            raise InvalidParameterError("tabulated density needs matching 1-d samples")
        if not np.all(np.diff(grid) > 0):
            raise InvalidParameterError("tabulated grid must be strictly increasing")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InvalidParameterError("tabulated density must be finite and nonnegative")
        mass = trapezoid(values, grid)
        if abs(mass - 1.0) > DENSITY_NORMALIZATION_TOL:
            raise InvalidParameterError(
                f"tabulated density integrates to {mass!r}, not 1"
            )
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_samples(
        cls, grid: Any, values: Any, normalize: bool = True, source: str | None = None
    ) -> Tabulated:
        """Build from samples, rescaling to unit mass when asked."""
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if normalize:
            mass = trapezoid(values, grid)
            if not mass > 0:
                raise InvalidParameterError("tabulated density has no positive mass")
            if abs(mass - 1.0) > DENSITY_NORMALIZATION_TOL:
                LOGGER.warning("renormalizing tabulated density with mass %.12g", mass)
            values = values / mass
        return cls(grid, values, source)

    @classmethod
    def from_csv(cls, path: str | Path, normalize: bool = True) -> Tabulated:
        """Load two-column (y, density) CSV."""
        grid, values = read_two_column_csv(path)
        return cls.from_samples(grid, values, normalize=normalize, source=str(path))

    def moments(self, N: int) -> MomentSequence:
        moments = [1.0] + [
            float(trapezoid(self.grid**k * self.values, self.grid)) for k in range(1, N + 1)
        ]
        return MomentSequence(tuple(moments))

    def char_fn(self, p: Any) -> complex | np.ndarray:
        flat = np.atleast_1d(np.asarray(p, dtype=float)).ravel()
        out = np.empty(flat.shape, dtype=complex)
        for start in range(0, len(flat), _CHAR_FN_CHUNK):
            chunk = flat[start : start + _CHAR_FN_CHUNK]
            out[start : start + _CHAR_FN_CHUNK] = trapezoid(
                np.exp(1j * chunk[:, None] * self.grid[None, :]) * self.values[None, :],
                self.grid,
                axis=1,
            )
        return _char_fn_output(p, out.reshape(np.shape(p)))

    def density(self, y: Any) -> np.ndarray:
        return np.interp(np.asarray(y, dtype=float), self.grid, self.values, left=0.0, right=0.0)

    @property
    def has_density(self) -> bool:
        return True

    @property
    def length_scale(self) -> float:
        return float(max(abs(self.grid[0]), abs(self.grid[-1])))

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "csv": self.source, "n": len(self.grid)}


@dataclass(frozen=True)
class MomentOnly(NonlocalityFunction):
    """A nonlocality known only through finitely many moments."""

    sequence: MomentSequence
    kind: ClassVar[str] = KIND_MOMENT_ONLY

    def moments(self, N: int) -> MomentSequence:
        return self.sequence.truncate(N)

    @property
    def has_char_fn(self) -> bool:
        return False

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "moments": [float(a) for a in self.sequence.values]}


@dataclass(frozen=True)
class SelfConvolution(NonlocalityFunction):
    """h ∗ h for an h without a closed-form self-convolution."""

    base: NonlocalityFunction
    kind: ClassVar[str] = KIND_SELF_CONVOLUTION

    def moments(self, N: int) -> MomentSequence:
        moments = self.base.moments(N)
        return moments.binomial_convolution(moments)

    def char_fn(self, p: Any) -> complex | np.ndarray:
        return self.base.char_fn(p) ** 2

    @property
    def length_scale(self) -> float:
        return 2.0 * self.base.length_scale

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "base": self.base.to_dict()}


def moments(H: NonlocalityFunction, N: int) -> MomentSequence:
    """a_0..a_N of H."""
    if N < 0:
        raise InvalidParameterError(f"moment order must be nonnegative, got {N}")
    return H.moments(N)


def char_fn(H: NonlocalityFunction, p: Any) -> complex | np.ndarray:
    """H̃(p)."""
    return H.char_fn(p)


def qfp_matching_nonlocality(eps: Scalar) -> Triangular:
    """The density whose moments are 2ε^k/((k+1)(k+2))."""
    return Triangular(eps)


def self_convolve(h: NonlocalityFunction) -> NonlocalityFunction:
    """H = h ∗ h."""
    if not h.has_char_fn:
        raise CharacteristicFunctionUnavailableError(
            f"characteristic function unavailable for {h.kind} nonlocality"
        )
    if isinstance(h, Dirac):
        return Dirac()
    if isinstance(h, Gaussian):
        return Gaussian(math.sqrt(2.0) * float(h.eps))
    return SelfConvolution(h)


def has_symbolic_moments(H: NonlocalityFunction) -> bool:
    """Whether symbolic_moments knows H in closed form."""
    return isinstance(H, (Dirac, Gaussian, Triangular))


def symbolic_moments(H: NonlocalityFunction, N: int) -> list[CoeffPoly]:
    """Exact moments μ_0..μ_N as polynomials in ε."""
    if isinstance(H, Dirac):
        return [COEFF_RING.one] + [COEFF_RING.zero] * N
    if isinstance(H, Gaussian):
        return [
            coeff_poly({(0, k): _double_factorial(k - 1)}) if k % 2 == 0 else COEFF_RING.zero
            for k in range(N + 1)
        ]
    if isinstance(H, Triangular):
        return [coeff_poly({(0, k): Fraction(2, (k + 1) * (k + 2))}) for k in range(N + 1)]
    raise InvalidParameterError(f"no symbolic moments for {H.kind} nonlocality")


def moment_polys(H: NonlocalityFunction, N: int) -> list[CoeffPoly]:
    """μ_0..μ_N as CoeffPolys.

    Closed-form kinds give polynomials in ε; any other kind gives constants
    taken exactly from its numeric moments.
    """
    if has_symbolic_moments(H):
        return symbolic_moments(H, N)
    return [
        coeff_poly({(0, 0): value if isinstance(value, Rational) else Fraction(float(value))})
        for value in moments(H, N).values
    ]


def nonlocality_from_dict(value: dict) -> NonlocalityFunction:
    """Convert a JSON description back to a NonlocalityFunction."""
    kind = value.get("kind")
    if kind == KIND_DIRAC:
        return Dirac()
    if kind == KIND_GAUSSIAN:
        return Gaussian(value["eps"])
    if kind == KIND_TRIANGULAR:
        return Triangular(value["eps"])
    if kind == KIND_TABULATED:
        if not value.get("csv"):
            raise InvalidParameterError("tabulated nonlocality needs a csv path")
        return Tabulated.from_csv(value["csv"])
    if kind == KIND_MOMENT_ONLY:
        return MomentOnly(MomentSequence(tuple(value["moments"])))
    if kind == KIND_SELF_CONVOLUTION:
        return self_convolve(nonlocality_from_dict(value["base"]))
    raise InvalidParameterError(f"unknown nonlocality kind {kind!r}")
