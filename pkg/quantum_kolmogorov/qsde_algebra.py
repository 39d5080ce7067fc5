"""Symbolic quantum Ito calculus for the translation-gauge process.

The four stochastic differentials dt, dA, dA† and dΛ multiply through a fixed
table; coefficients are exact polynomials in (σ, ε) over the rationals. From
the expansion of dX^k for the drift-free increment

    dX = σ dA + σ dA† + ε dΛ

the dt coefficient survives the vacuum expectation, giving the generator of
the quantum Kolmogorov backward equation and, with ε → −ε, the quantum
Fokker-Planck equation.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any

from sympy.polys.domains import QQ
from sympy.polys.rings import PolyElement, ring

from .const import CONVENTION_BACKWARD, CONVENTION_FOKKER_PLANCK, LOGGER
from .exceptions import InvalidParameterError

COEFF_RING, SIGMA, EPS = ring("sigma, eps", QQ)

CoeffPoly = PolyElement


class DifferentialBasis(Enum):
    """A quantum stochastic differential."""

    DT = "dt"
    DA = "dA"
    DADAG = "dAdag"
    DLAMBDA = "dLambda"


# row = left factor, column = right factor; missing entries are zero
_ITO_TABLE: dict[tuple[DifferentialBasis, DifferentialBasis], DifferentialBasis] = {
    (DifferentialBasis.DA, DifferentialBasis.DADAG): DifferentialBasis.DT,
    (DifferentialBasis.DA, DifferentialBasis.DLAMBDA): DifferentialBasis.DA,
    (DifferentialBasis.DLAMBDA, DifferentialBasis.DADAG): DifferentialBasis.DADAG,
    (DifferentialBasis.DLAMBDA, DifferentialBasis.DLAMBDA): DifferentialBasis.DLAMBDA,
}


def ito_multiply(
    left: DifferentialBasis, right: DifferentialBasis
) -> DifferentialBasis | None:
    """Multiply two differentials through the Ito table; None is zero."""
    return _ITO_TABLE.get((left, right))


def coeff_poly(
    terms: Mapping[tuple[int, int], Fraction | int] | None = None,
) -> CoeffPoly:
    """Build a CoeffPoly from {(sigma power, eps power): rational}."""
    if not terms:
        return COEFF_RING.zero
    return COEFF_RING.from_dict(
        {
            monom: QQ(Fraction(value).numerator, Fraction(value).denominator)
            for monom, value in terms.items()
        }
    )


def poly_terms(poly: CoeffPoly) -> dict[tuple[int, int], Fraction]:
    """Return the nonzero terms of a CoeffPoly as exact Fractions."""
    return {
        tuple(monom): Fraction(int(QQ.numer(value)), int(QQ.denom(value)))
        for monom, value in poly.items()
    }


def negate_eps(poly: CoeffPoly) -> CoeffPoly:
    """Substitute ε → −ε."""
    return COEFF_RING.from_dict(
        {monom: (value if monom[1] % 2 == 0 else -value) for monom, value in poly.items()}
    )


def evaluate_poly(poly: CoeffPoly, sigma: float, eps: float) -> float:
    """Evaluate a CoeffPoly at numeric (σ, ε)."""
    return math.fsum(
        float(value) * sigma**i * eps**j for (i, j), value in poly_terms(poly).items()
    )


@dataclass(frozen=True)
class IncrementCombination:
    """c_t dt + c_A dA + c_A† dA† + c_Λ dΛ with polynomial coefficients."""

    coeff: Mapping[DifferentialBasis, CoeffPoly] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Drop zero-valued entries so equality is structural."""
        object.__setattr__(
            self,
            "coeff",
            {basis: value for basis, value in self.coeff.items() if value},
        )

    @classmethod
    def from_terms(
        cls, terms: Iterable[tuple[CoeffPoly | int | Fraction, DifferentialBasis]]
    ) -> IncrementCombination:
        """Sum (coefficient, differential) pairs."""
        out: dict[DifferentialBasis, CoeffPoly] = {}
        for value, basis in terms:
            if not isinstance(value, PolyElement):
                value = coeff_poly({(0, 0): value})
            out[basis] = out.get(basis, COEFF_RING.zero) + value
        return cls(out)

    @classmethod
    def basis(cls, basis: DifferentialBasis) -> IncrementCombination:
        """The single differential with coefficient one."""
        return cls({basis: COEFF_RING.one})

    @classmethod
    def drift_free(
        cls, sigma: CoeffPoly = SIGMA, eps: CoeffPoly = EPS
    ) -> IncrementCombination:
        """dX = σ dA + σ dA† + ε dΛ."""
        return cls.from_terms(
            [
                (sigma, DifferentialBasis.DA),
                (sigma, DifferentialBasis.DADAG),
                (eps, DifferentialBasis.DLAMBDA),
            ]
        )

    def get(self, basis: DifferentialBasis) -> CoeffPoly:
        """Coefficient of one differential (zero when absent)."""
        return self.coeff.get(basis, COEFF_RING.zero)

    def is_zero(self) -> bool:
        """True when every coefficient vanishes."""
        return not self.coeff

    def __add__(self, other: IncrementCombination) -> IncrementCombination:
        out = dict(self.coeff)
        for basis, value in other.coeff.items():
            out[basis] = out.get(basis, COEFF_RING.zero) + value
        return IncrementCombination(out)

    def __neg__(self) -> IncrementCombination:
        return IncrementCombination({basis: -value for basis, value in self.coeff.items()})

    def __sub__(self, other: IncrementCombination) -> IncrementCombination:
        return self + (-other)

    def __matmul__(self, other: IncrementCombination) -> IncrementCombination:
        return combine_multiply(self, other)

    def __str__(self) -> str:
        if self.is_zero():
            return "0"
        return " + ".join(
            f"({self.coeff[basis].as_expr()})·{basis.value}"
            for basis in DifferentialBasis
            if basis in self.coeff
        )


def combine_multiply(
    x: IncrementCombination, y: IncrementCombination
) -> IncrementCombination:
    """Bilinear extension of the Ito table; x is the left factor."""
    out: dict[DifferentialBasis, CoeffPoly] = {}
    for left, left_coeff in x.coeff.items():
        for right, right_coeff in y.coeff.items():
            product = ito_multiply(left, right)
            if product is None:
                continue
            out[product] = out.get(product, COEFF_RING.zero) + left_coeff * right_coeff
    return IncrementCombination(out)


def commutator(x: IncrementCombination, y: IncrementCombination) -> IncrementCombination:
    """x·y − y·x."""
    return combine_multiply(x, y) - combine_multiply(y, x)


def expand_power(k: int, base: IncrementCombination) -> IncrementCombination:
    """dX^k as a left fold of Ito products."""
    if k < 1:
        raise InvalidParameterError(f"power must be at least 1, got {k}")
    result = base
    for _ in range(k - 1):
        result = combine_multiply(result, base)
    return result


def vacuum_expectation(x: IncrementCombination) -> CoeffPoly:
    """The dt coefficient; every other differential has zero vacuum expectation."""
    return x.get(DifferentialBasis.DT)


def quadratic_variation_check() -> bool:
    """E[(dA + dA†)²] = dt, the classical Brownian identity."""
    brownian = IncrementCombination.from_terms(
        [(1, DifferentialBasis.DA), (1, DifferentialBasis.DADAG)]
    )
    return vacuum_expectation(expand_power(2, brownian)) == COEFF_RING.one


@dataclass(frozen=True)
class BackwardPDE:
    """Generator Σ_{k=2..N} b_k ∂^k of a backward or Fokker-Planck equation."""

    order: int
    coeffs: tuple[CoeffPoly, ...]
    convention: str = CONVENTION_BACKWARD

    def __post_init__(self) -> None:
        if self.order < 2:
            raise InvalidParameterError(f"PDE order must be at least 2, got {self.order}")
        if len(self.coeffs) != self.order - 1:
            raise InvalidParameterError(
                f"expected {self.order - 1} coefficients, got {len(self.coeffs)}"
            )
        if self.convention not in (CONVENTION_BACKWARD, CONVENTION_FOKKER_PLANCK):
            raise InvalidParameterError(f"unknown convention {self.convention!r}")

    def coefficient(self, k: int) -> CoeffPoly:
        """b_k for 2 ≤ k ≤ order."""
        if not 2 <= k <= self.order:
            raise InvalidParameterError(f"derivative order {k} outside 2..{self.order}")
        return self.coeffs[k - 2]

    def numeric_coefficients(self, sigma: float, eps: float) -> list[float]:
        """b_2..b_N evaluated at (σ, ε)."""
        return [evaluate_poly(poly, sigma, eps) for poly in self.coeffs]

    def truncate(self, order: int) -> BackwardPDE:
        """Keep derivative orders up to `order`."""
        if not 2 <= order <= self.order:
            raise InvalidParameterError(f"cannot truncate order {self.order} to {order}")
        return BackwardPDE(order, self.coeffs[: order - 1], self.convention)

    def to_dict(self) -> dict[str, Any]:
        """JSON form: {"convention", "coeffs": [{"k", "poly": [...]}]}."""
        return {
            "convention": self.convention,
            "coeffs": [
                {
                    "k": k,
                    "poly": [
                        {
                            "sigma_pow": i,
                            "eps_pow": j,
                            "num": value.numerator,
                            "den": value.denominator,
                        }
                        for (i, j), value in sorted(poly_terms(poly).items())
                    ],
                }
                for k, poly in enumerate(self.coeffs, start=2)
            ],
        }

    @classmethod
    def from_dict(cls, value: dict) -> BackwardPDE:
        """Convert the JSON form back to a BackwardPDE."""
        entries = sorted(value["coeffs"], key=lambda entry: entry["k"])
        coeffs = tuple(
            coeff_poly(
                {
                    (term["sigma_pow"], term["eps_pow"]): Fraction(term["num"], term["den"])
                    for term in entry["poly"]
                }
            )
            for entry in entries
        )
        return cls(
            order=len(coeffs) + 1, coeffs=coeffs, convention=value["convention"]
        )


def derive_backward_pde(
    N: int, sigma: CoeffPoly = SIGMA, eps: CoeffPoly = EPS
) -> BackwardPDE:
    """b_k = E[dX^k]/k! for 2 ≤ k ≤ N, exactly."""
    if N < 2:
        raise InvalidParameterError(f"PDE order must be at least 2, got {N}")
    base = IncrementCombination.drift_free(sigma, eps)
    coeffs = []
    power = base
    for k in range(2, N + 1):
        power = combine_multiply(power, base)
        coeffs.append(vacuum_expectation(power) * QQ(1, math.factorial(k)))
    LOGGER.debug("derived backward generator to order %d", N)
    return BackwardPDE(N, tuple(coeffs), CONVENTION_BACKWARD)


def derive_fokker_planck(N: int) -> BackwardPDE:
    """Adjoint generator: the backward coefficients under ε → −ε."""
    backward = derive_backward_pde(N)
    return BackwardPDE(
        N, tuple(negate_eps(poly) for poly in backward.coeffs), CONVENTION_FOKKER_PLANCK
    )


def kramers_moyal_pde(moment_polys: Sequence[CoeffPoly], N: int) -> BackwardPDE:
    """Kramers-Moyal form of ∂τψ = (σ²/2)∂²(H∗ψ) truncated at order N.

    The order k+2 coefficient is (σ²/2)(−1)^k μ_k/k!, which needs the exact
    nonlocality moments μ_0..μ_{N−2}.
    """
    if N < 2:
        raise InvalidParameterError(f"PDE order must be at least 2, got {N}")
    if len(moment_polys) < N - 1:
        raise InvalidParameterError(
            f"order {N} needs moments up to {N - 2}, got {len(moment_polys) - 1}"
        )
    half_sigma2 = SIGMA**2 * QQ(1, 2)
    coeffs = tuple(
        half_sigma2 * moment_polys[k] * QQ((-1) ** k, math.factorial(k))
        for k in range(N - 1)
    )
    return BackwardPDE(N, coeffs, CONVENTION_FOKKER_PLANCK)
