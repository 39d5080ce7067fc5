"""Kernel moments from nonlocality moments.

The moment generating function of K^H_τ is

    M(p) = exp((σ²τ/2) p² Σ_j a_j p^j / j!),

so μ_n = n!·[p^n] M. Two independent evaluations are provided: the recursive
exponential of the truncated exponent, and a sum over the partitions of n
into parts of size at least two. With rational inputs both are exact and must
agree to the last digit; grid quadrature of the built kernel is the external
check.
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

import mpmath
from sympy.utilities.iterables import partitions

from .const import DEFAULT_MOMENT_ORDER, LOGGER
from .data import MomentReportRow
from .exceptions import InvalidParameterError, MomentsUnavailableError
from .kernel_engine import FourierGrid, build_kernel
from .nonlocality import MomentSequence, NonlocalityFunction

Coefficient = Fraction | mpmath.mpf

MOMENT_PRECISION_DPS = 50

# private context so sweeps on worker threads never touch mpmath.mp
_MP = mpmath.MPContext()
_MP.dps = MOMENT_PRECISION_DPS


def _is_exact(value: Any) -> bool:
    return isinstance(value, (int, Fraction))


def _to_mpf(value: Any) -> mpmath.mpf:
    if isinstance(value, Fraction):
        return _MP.mpf(value.numerator) / value.denominator
    return _MP.mpf(value)


def _to_field(values: Sequence[Any]) -> list[Coefficient]:
    """Exact Fractions when every value is rational, high-precision floats otherwise."""
    if all(_is_exact(value) for value in values):
        return [Fraction(value) for value in values]
    return [_to_mpf(value) for value in values]


def format_coefficient(value: Coefficient) -> str:
    """'p/q' for exact values, 30 significant digits otherwise."""
    if isinstance(value, Fraction):
        return str(value)
    return _MP.nstr(value, 30)


@dataclass(frozen=True)
class FormalSeries:
    """c_0 + c_1 p + ... + c_N p^N."""

    coeffs: tuple[Coefficient, ...]

    def __post_init__(self) -> None:
        if not self.coeffs:
            raise InvalidParameterError("a formal series needs at least c_0")
        object.__setattr__(self, "coeffs", tuple(_to_field(self.coeffs)))

    @classmethod
    def zero(cls, order: int) -> FormalSeries:
        """0 truncated at order."""
        return cls((Fraction(0),) * (order + 1))

    @classmethod
    def monomial(cls, k: int, order: int, coefficient: Any = 1) -> FormalSeries:
        """coefficient·p^k truncated at order."""
        coeffs = [Fraction(0)] * (order + 1)
        if k <= order:
            coeffs[k] = coefficient
        return cls(tuple(coeffs))

    @property
    def order(self) -> int:
        """Truncation order N."""
        return len(self.coeffs) - 1

    @property
    def is_exact(self) -> bool:
        """True when the coefficients are rationals."""
        return isinstance(self.coeffs[0], Fraction)

    def __getitem__(self, k: int) -> Coefficient:
        return self.coeffs[k]

    def __len__(self) -> int:
        return len(self.coeffs)

    def __iter__(self) -> Iterator[Coefficient]:
        return iter(self.coeffs)

    def truncate(self, order: int) -> FormalSeries:
        """Drop terms above order."""
        return FormalSeries(self.coeffs[: order + 1])

    def __add__(self, other: FormalSeries) -> FormalSeries:
        N = min(self.order, other.order)
        return FormalSeries(tuple(self[k] + other[k] for k in range(N + 1)))

    def __neg__(self) -> FormalSeries:
        return FormalSeries(tuple(-c for c in self.coeffs))

    def __sub__(self, other: FormalSeries) -> FormalSeries:
        return self + (-other)

    def __mul__(self, other: FormalSeries) -> FormalSeries:
        N = min(self.order, other.order)
        return FormalSeries(
            tuple(
                sum((self[k] * other[n - k] for k in range(n + 1)), start=0 * self[0])
                for n in range(N + 1)
            )
        )

    def scale(self, factor: Any) -> FormalSeries:
        """factor·f."""
        return FormalSeries(tuple(factor * c for c in self.coeffs))

    def derivative(self) -> FormalSeries:
        """f′, one order shorter."""
        if self.order == 0:
            return FormalSeries((0 * self[0],))
        return FormalSeries(tuple(k * self[k] for k in range(1, self.order + 1)))

    def to_strings(self) -> list[str]:
        """Coefficients as text."""
        return [format_coefficient(c) for c in self.coeffs]


def series_exp(f: FormalSeries) -> FormalSeries:
    """exp(f) for f with zero constant term.

    Uses g′ = f′g, i.e. n·g_n = Σ_{k=1..n} k·f_k·g_{n−k}.
    """
    if f[0] != 0:
        raise InvalidParameterError("series_exp needs a zero constant term")
    one = f[0] + 1
    g = [one]
    for n in range(1, f.order + 1):
        total = sum((k * f[k] * g[n - k] for k in range(1, n + 1)), start=0 * one)
        g.append(total / n)
    return FormalSeries(tuple(g))


def _exponent(a: MomentSequence, sigma: Any, tau: Any, N: int) -> FormalSeries:
    if N < 0:
        raise InvalidParameterError(f"truncation order must be nonnegative, got {N}")
    if a.order < N - 2:
        raise MomentsUnavailableError(
            f"order {N} needs nonlocality moments up to {N - 2}, got {a.order}"
        )
    scale, *moments = _to_field([sigma**2 * tau, *a.values[: max(N - 1, 0)]])
    coeffs: list[Any] = [0 * scale] * (N + 1)
    for j, a_j in enumerate(moments):
        coeffs[j + 2] = scale * a_j / (2 * math.factorial(j))
    return FormalSeries(tuple(coeffs))


def mgf_series(a: MomentSequence, sigma: Any, tau: Any, N: int) -> FormalSeries:
    """exp((σ²τ/2)·p²·Σ a_j p^j/j!) truncated at N."""
    return series_exp(_exponent(a, sigma, tau, N))


def kernel_moments(a: MomentSequence, sigma: Any, tau: Any, N: int) -> list[Coefficient]:
    """μ_n = n!·c_n of the moment generating series."""
    series = mgf_series(a, sigma, tau, N)
    return [math.factorial(n) * c for n, c in enumerate(series)]


@dataclass(frozen=True)
class PartitionSet:
    """Partitions of n into parts ≥ 2, parts listed in decreasing order."""

    n: int
    parts: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.parts)

    def __iter__(self) -> Iterator[tuple[int, ...]]:
        return iter(self.parts)

    def __contains__(self, partition: object) -> bool:
        if not isinstance(partition, Sequence):
            return False
        return tuple(sorted(partition, reverse=True)) in self.parts


def partitions_without_one(n: int) -> PartitionSet:
    """Every partition of n whose smallest part is at least 2."""
    if n < 0:
        raise InvalidParameterError(f"cannot partition {n}")
    if n < 2:
        return PartitionSet(n, ())
    found = []
    for multiplicities in partitions(n):
        if 1 in multiplicities:
            continue
        found.append(
            tuple(
                part
                for part in sorted(multiplicities, reverse=True)
                for _ in range(multiplicities[part])
            )
        )
    return PartitionSet(n, tuple(sorted(found, reverse=True)))


def _partition_weight(
    partition: tuple[int, ...], terms: Sequence[Coefficient]
) -> Coefficient:
    weight = terms[0] ** 0
    for part, multiplicity in Counter(partition).items():
        weight *= terms[part] ** multiplicity / math.factorial(multiplicity)
    return weight


def kernel_moments_partition(
    a: MomentSequence, sigma: Any, tau: Any, N: int
) -> list[Coefficient]:
    """μ_n = n!·Σ_P Π_i [σ²τ·a_{i−2}/(2(i−2)!)]^{m_i}/m_i!."""
    terms = _exponent(a, sigma, tau, N).coeffs
    one = terms[0] + 1
    out = [one]
    for n in range(1, N + 1):
        total = sum(
            (
                _partition_weight(partition, terms)
                for partition in partitions_without_one(n)
            ),
            start=0 * one,
        )
        out.append(math.factorial(n) * total)
    return out


def moment_scaling_check(
    a: MomentSequence, sigma: Any, tau: Any, factor: Any, N: int
) -> bool:
    """Check μ_n(c·σ²τ) = n!·Σ_P c^{#P}·weight(P) for n ≤ N."""
    terms = _exponent(a, sigma, tau, N).coeffs
    if isinstance(terms[0], Fraction) and _is_exact(factor):
        c = Fraction(factor)
    else:
        c = _to_mpf(factor)
        terms = tuple(_to_mpf(t) for t in terms)
    predicted = [terms[0] + 1] + [
        math.factorial(n)
        * sum(
            (
                c ** len(partition) * _partition_weight(partition, terms)
                for partition in partitions_without_one(n)
            ),
            start=0 * terms[0],
        )
        for n in range(1, N + 1)
    ]
    recomputed = kernel_moments(a, sigma, tau * factor, N)
    return all(_agree(x, y) for x, y in zip(predicted, recomputed))


def _agree(x: Coefficient, y: Coefficient) -> bool:
    if isinstance(x, Fraction) and isinstance(y, Fraction):
        return x == y
    tolerance = _MP.mpf(10) ** (10 - _MP.dps)
    return bool(_MP.almosteq(_to_mpf(x), _to_mpf(y), rel_eps=tolerance))


def methods_agree(
    series: Sequence[Coefficient], partition: Sequence[Coefficient]
) -> bool:
    """Exact equality for rationals, near-equality at working precision otherwise."""
    return len(series) == len(partition) and all(
        _agree(x, y) for x, y in zip(series, partition)
    )


def reconcile(
    H: NonlocalityFunction,
    sigma: Any,
    tau: Any,
    N: int = DEFAULT_MOMENT_ORDER,
    grid: Any = None,
) -> list[MomentReportRow]:
    """Series vs partition vs grid quadrature for μ_0..μ_N.

    rel_gap is |series − quadrature| / max(|series|, (σ²τ)^{n/2}), so odd
    moments that vanish exactly are measured on the natural scale. agree marks
    orders where series and partition match.
    """
    a = H.moments(max(N - 2, 0))
    series = kernel_moments(a, sigma, tau, N)
    partition = kernel_moments_partition(a, sigma, tau, N)
    if not methods_agree(series, partition):
        LOGGER.error("series and partition moments disagree for %s", H.kind)

    kernel = None
    if H.has_char_fn:
        if grid is None:
            grid = FourierGrid.default_for(sigma, tau, H.length_scale)
        kernel = build_kernel(H, float(sigma), float(tau), grid)
    else:
        LOGGER.info("%s nonlocality has no kernel; quadrature column left empty", H.kind)

    scale = float(sigma) ** 2 * float(tau)
    rows = []
    for n, (mu_series, mu_partition) in enumerate(zip(series, partition)):
        quadrature = rel_gap = None
        if kernel is not None:
            quadrature = kernel.moment(n)
            reference = float(mu_series)
            rel_gap = abs(reference - quadrature) / max(
                abs(reference), scale ** (n / 2)
            )
        rows.append(
            MomentReportRow(
                n=n,
                series=format_coefficient(mu_series),
                partition=format_coefficient(mu_partition),
                quadrature=quadrature,
                rel_gap=rel_gap,
                agree=_agree(mu_series, mu_partition),
            )
        )
    return rows
