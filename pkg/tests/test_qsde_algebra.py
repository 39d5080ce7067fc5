"""Tests for the Ito table and the backward equation derivation."""

from __future__ import annotations

import math
from fractions import Fraction

import pytest

from quantum_kolmogorov.const import CONVENTION_BACKWARD, CONVENTION_FOKKER_PLANCK
from quantum_kolmogorov.exceptions import InvalidParameterError
from quantum_kolmogorov.nonlocality import Dirac, Triangular, symbolic_moments
from quantum_kolmogorov.qsde_algebra import (
    EPS,
    SIGMA,
    BackwardPDE,
    DifferentialBasis,
    IncrementCombination,
    coeff_poly,
    combine_multiply,
    commutator,
    derive_backward_pde,
    derive_fokker_planck,
    evaluate_poly,
    expand_power,
    ito_multiply,
    kramers_moyal_pde,
    negate_eps,
    quadratic_variation_check,
    vacuum_expectation,
)

DT = DifferentialBasis.DT
DA = DifferentialBasis.DA
DADAG = DifferentialBasis.DADAG
DLAMBDA = DifferentialBasis.DLAMBDA


def _backward(k: int) -> object:
    return coeff_poly({(2, k - 2): Fraction(1, math.factorial(k))})


@pytest.mark.parametrize(
    ("left", "right", "expected"),
    [
        (DA, DADAG, DT),
        (DADAG, DA, None),
        (DLAMBDA, DLAMBDA, DLAMBDA),
        (DT, DT, None),
        (DA, DLAMBDA, DA),
        (DLAMBDA, DA, None),
        (DLAMBDA, DADAG, DADAG),
    ],
)
def test_ito_table_entries(left, right, expected) -> None:
    assert ito_multiply(left, right) is expected


@pytest.mark.parametrize("left", [DADAG, DT])
def test_zero_rows(left) -> None:
    assert all(ito_multiply(left, right) is None for right in DifferentialBasis)


def test_table_is_closed() -> None:
    for left in DifferentialBasis:
        for right in DifferentialBasis:
            product = ito_multiply(left, right)
            assert product is None or isinstance(product, DifferentialBasis)


def test_square_of_drift_free_increment() -> None:
    base = IncrementCombination.drift_free()
    expected = IncrementCombination.from_terms(
        [(SIGMA**2, DT), (SIGMA * EPS, DA), (SIGMA * EPS, DADAG), (EPS**2, DLAMBDA)]
    )
    assert combine_multiply(base, base) == expected
    assert base @ base == expected


def test_product_is_noncommutative() -> None:
    dA = IncrementCombination.basis(DA)
    dLambda = IncrementCombination.basis(DLAMBDA)
    assert dA @ dLambda == dA
    assert (dLambda @ dA).is_zero()
    assert commutator(dA, IncrementCombination.basis(DADAG)) == IncrementCombination.basis(DT)


def test_product_with_zero() -> None:
    base = IncrementCombination.drift_free()
    assert (base @ IncrementCombination()).is_zero()


def test_expand_power() -> None:
    base = IncrementCombination.drift_free()
    assert expand_power(1, base) == base
    assert expand_power(3, base) == IncrementCombination.from_terms(
        [
            (SIGMA**2 * EPS, DT),
            (SIGMA * EPS**2, DA),
            (SIGMA * EPS**2, DADAG),
            (EPS**3, DLAMBDA),
        ]
    )
    with pytest.raises(InvalidParameterError):
        expand_power(0, base)


def test_vacuum_expectation() -> None:
    base = IncrementCombination.drift_free()
    assert vacuum_expectation(expand_power(2, base)) == SIGMA**2
    assert vacuum_expectation(expand_power(4, base)) == SIGMA**2 * EPS**2
    assert vacuum_expectation(IncrementCombination.basis(DA)) == 0


@pytest.mark.parametrize("k", range(2, 13))
def test_vacuum_expectation_of_powers(k: int) -> None:
    base = IncrementCombination.drift_free()
    assert vacuum_expectation(expand_power(k, base)) == SIGMA**2 * EPS ** (k - 2)


def test_product_is_associative_on_the_basis() -> None:
    basis = [IncrementCombination.basis(tag) for tag in DifferentialBasis]
    for x in basis:
        for y in basis:
            for z in basis:
                assert (x @ y) @ z == x @ (y @ z)


def test_quadratic_variation() -> None:
    assert quadratic_variation_check()


def test_backward_coefficients_to_order_twelve() -> None:
    pde = derive_backward_pde(12)
    assert pde.convention == CONVENTION_BACKWARD
    for k in range(2, 13):
        assert pde.coefficient(k) == _backward(k)


def test_backward_small_orders() -> None:
    assert derive_backward_pde(2).coeffs == (coeff_poly({(2, 0): Fraction(1, 2)}),)
    assert derive_backward_pde(4).numeric_coefficients(1.0, 0.5) == pytest.approx(
        [0.5, 0.5 / 6, 0.25 / 24]
    )
    # ε = 0 leaves only the heat operator
    assert derive_backward_pde(6).numeric_coefficients(1.3, 0.0) == pytest.approx(
        [1.3**2 / 2, 0.0, 0.0, 0.0, 0.0]
    )
    with pytest.raises(InvalidParameterError):
        derive_backward_pde(1)


def test_fokker_planck_flips_odd_orders() -> None:
    forward = derive_fokker_planck(3)
    assert forward.convention == CONVENTION_FOKKER_PLANCK
    assert forward.coefficient(2) == coeff_poly({(2, 0): Fraction(1, 2)})
    assert forward.coefficient(3) == coeff_poly({(2, 1): Fraction(-1, 6)})

    backward = derive_backward_pde(8)
    forward = derive_fokker_planck(8)
    for k in range(2, 9):
        assert forward.coefficient(k) == negate_eps(backward.coefficient(k))
        assert forward.coefficient(k) == coeff_poly(
            {(2, k - 2): Fraction((-1) ** k, math.factorial(k))}
        )


@pytest.mark.parametrize("N", range(2, 11))
def test_triangular_moments_close_the_fokker_planck_equation(N: int) -> None:
    moments = symbolic_moments(Triangular(1), N - 2)
    assert kramers_moyal_pde(moments, N).coeffs == derive_fokker_planck(N).coeffs


def test_kramers_moyal_needs_enough_moments() -> None:
    with pytest.raises(InvalidParameterError):
        kramers_moyal_pde(symbolic_moments(Dirac(), 1), 4)


def test_local_kramers_moyal_is_the_heat_equation() -> None:
    pde = kramers_moyal_pde(symbolic_moments(Dirac(), 4), 6)
    assert pde.numeric_coefficients(2.0, 0.1) == pytest.approx([2.0, 0, 0, 0, 0])


def test_pde_serialization() -> None:
    pde = derive_fokker_planck(5)
    document = pde.to_dict()
    assert document["coeffs"][1] == {
        "k": 3,
        "poly": [{"sigma_pow": 2, "eps_pow": 1, "num": -1, "den": 6}],
    }
    assert BackwardPDE.from_dict(document) == pde


def test_truncate_and_bad_orders() -> None:
    pde = derive_backward_pde(6)
    assert pde.truncate(3).coeffs == pde.coeffs[:2]
    with pytest.raises(InvalidParameterError):
        pde.truncate(7)
    with pytest.raises(InvalidParameterError):
        pde.coefficient(1)
    with pytest.raises(InvalidParameterError):
        BackwardPDE(3, pde.coeffs)


def test_evaluate_poly() -> None:
    poly = coeff_poly({(2, 1): Fraction(-1, 6), (0, 0): 3})
    assert evaluate_poly(poly, 2.0, 0.5) == pytest.approx(3 - 4 * 0.5 / 6)
