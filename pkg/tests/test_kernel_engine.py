"""Tests for kernels, spectral propagation and the Kramers-Moyal solver."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.stats import norm

from quantum_kolmogorov.data import KernelSidecar, read_json
from quantum_kolmogorov.exceptions import (
    BoundaryMassError,
    CharacteristicFunctionUnavailableError,
    GridDomainError,
    GridMismatchError,
    InvalidParameterError,
    NumericalInstabilityError,
)
from quantum_kolmogorov.kernel_engine import (
    FourierGrid,
    SolutionSlice,
    boundary_band,
    build_kernel,
    central_stencil,
    excess_kurtosis_sweep,
    kernel_moment,
    kramers_moyal_operator,
    one_sided_stencil,
    propagate,
    solve_kramers_moyal,
    stable_time_step,
    sup_norm_distance,
)
from quantum_kolmogorov.nonlocality import (
    Dirac,
    Gaussian,
    MomentOnly,
    MomentSequence,
    Triangular,
    symbolic_moments,
)
from quantum_kolmogorov.qsde_algebra import BackwardPDE, coeff_poly, kramers_moyal_pde


def _km_pde(H, N: int) -> BackwardPDE:
    return kramers_moyal_pde(symbolic_moments(H, N - 2), N)


def test_grid_layout() -> None:
    grid = FourierGrid.from_length(8, 4.0)
    assert grid.spacing == 0.5
    assert grid.length == 4.0
    np.testing.assert_array_equal(grid.x, [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5])
    np.testing.assert_array_equal(grid.offsets, [0.0, 0.5, 1.0, 1.5, -2.0, -1.5, -1.0, -0.5])
    assert grid.frequencies[1] == pytest.approx(2 * math.pi / 4.0)
    assert grid.to_dict() == {"n": 8, "L": 4.0}
    assert FourierGrid.default_for(1, 4, 0.05, 1024).length == pytest.approx(60.0)


@pytest.mark.parametrize("n", [0, 3, 1000])
def test_grid_rejects_non_powers_of_two(n: int) -> None:
    with pytest.raises(InvalidParameterError):
        FourierGrid(n, 0.1)


def test_dirac_kernel_is_the_heat_kernel(heat_grid: FourierGrid) -> None:
    K = build_kernel(Dirac(), 1.0, 1.0, heat_grid)
    assert np.max(np.abs(K.values - norm.pdf(heat_grid.x))) < 1e-8
    assert K.mass() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize(("sigma", "tau"), [(0.5, 2.0), (1.5, 0.25)])
def test_dirac_kernel_for_other_parameters(heat_grid, sigma: float, tau: float) -> None:
    K = build_kernel(Dirac(), sigma, tau, heat_grid)
    expected = norm.pdf(heat_grid.x, scale=sigma * math.sqrt(tau))
    assert np.max(np.abs(K.values - expected)) < 1e-8


def test_dirac_kernel_moments(heat_grid: FourierGrid) -> None:
    K = build_kernel(Dirac(), 1.0, 1.0, heat_grid)
    assert kernel_moment(K, 0) == 1.0
    assert kernel_moment(K, 2) == pytest.approx(1.0, rel=1e-6)
    assert kernel_moment(K, 4) == pytest.approx(3.0, rel=1e-5)
    assert K.negative_mass() < 0.05
    assert K.excess_kurtosis() == pytest.approx(0.0, abs=1e-5)
    with pytest.raises(InvalidParameterError):
        kernel_moment(K, -1)


def test_gaussian_nonlocality_kernel_moments() -> None:
    eps = 0.05
    H = Gaussian(eps)
    K = build_kernel(H, 1.0, 1.0, FourierGrid.default_for(1.0, 1.0, eps))
    assert K.moment(2) == pytest.approx(1.0, rel=5e-3)
    assert K.moment(4) == pytest.approx(3.0 + 6.0 * eps**2, rel=5e-3)


def test_lattice_aligned_triangular_kernel_is_a_probability() -> None:
    # ε is ten grid cells, so the compensated Poisson law sits on grid points
    grid = FourierGrid.from_length(4096, 20.48)
    K = build_kernel(Triangular(0.05), 1.0, 1.0, grid)
    assert K.negative_mass() < 0.05
    assert K.moment(1) == pytest.approx(0.0, abs=1e-9)
    assert K.moment(2) == pytest.approx(1.0, rel=1e-6)


def test_kernel_needs_a_wide_enough_domain() -> None:
    with pytest.raises(BoundaryMassError):
        build_kernel(Dirac(), 1.0, 1.0, FourierGrid.from_length(256, 2.0))


def test_kernel_needs_a_characteristic_function(heat_grid) -> None:
    H = MomentOnly(MomentSequence((1, 0, 1)))
    with pytest.raises(CharacteristicFunctionUnavailableError):
        build_kernel(H, 1.0, 1.0, heat_grid)


def test_kernel_rejects_bad_parameters(heat_grid) -> None:
    with pytest.raises(InvalidParameterError):
        build_kernel(Dirac(), 0.0, 1.0, heat_grid)
    with pytest.raises(InvalidParameterError):
        build_kernel(Dirac(), 1.0, -1.0, heat_grid)


def test_kernel_csv_and_sidecar(tmp_path, heat_grid) -> None:
    K = build_kernel(Dirac(), 1.0, 1.0, heat_grid)
    sidecar_path = K.to_csv(tmp_path / "kernel.csv")
    assert sidecar_path == tmp_path / "kernel.json"
    sidecar = KernelSidecar.from_dict(read_json(sidecar_path))
    assert sidecar == KernelSidecar(sigma=1.0, tau=1.0, H={"kind": "dirac"}, n=4096, L=20.0)
    restored = SolutionSlice.from_csv(tmp_path / "kernel.csv")
    np.testing.assert_array_equal(restored.values, K.values)


def test_kurtosis_grows_as_tau_shrinks() -> None:
    taus = [1.0, 0.5, 0.25, 0.125]
    kurtosis = excess_kurtosis_sweep(Gaussian(0.05), 1.0, taus)
    assert all(a < b for a, b in zip(kurtosis, kurtosis[1:]))
    assert kurtosis[0] == pytest.approx(6 * 0.05**2, rel=0.05)
    assert excess_kurtosis_sweep(Gaussian(0.05), 1.0, taus, jobs=2) == kurtosis


def test_semigroup(coarse_grid, gaussian_bump) -> None:
    H = Triangular(0.05)
    twice = propagate(propagate(gaussian_bump, H, 1.0, 0.3), H, 1.0, 0.2)
    once = propagate(gaussian_bump, H, 1.0, 0.5)
    assert sup_norm_distance(twice, once) < 1e-7
    assert once.tau == pytest.approx(0.5)


def test_propagating_the_kernel_advances_its_time(heat_grid) -> None:
    K = build_kernel(Dirac(), 1.0, 0.5, heat_grid)
    u = propagate(SolutionSlice(heat_grid, K.values), Dirac(), 1.0, 0.25)
    assert np.max(np.abs(u.values - build_kernel(Dirac(), 1.0, 0.75, heat_grid).values)) < 1e-8


def test_bachelier_call(heat_grid) -> None:
    payoff = SolutionSlice.from_function(heat_grid, lambda x: np.maximum(x, 0.0))
    value = propagate(payoff, Dirac(), 1.0, 1.0)
    at_the_money = value.values[heat_grid.n_points // 2]
    assert at_the_money == pytest.approx(1.0 / math.sqrt(2 * math.pi), rel=1e-4)


def test_tiny_tau_is_the_identity(coarse_grid, gaussian_bump) -> None:
    u = propagate(gaussian_bump, Triangular(0.05), 1.0, 1e-8)
    assert sup_norm_distance(u, gaussian_bump) < 1e-5


def test_mass_is_conserved(coarse_grid, gaussian_bump) -> None:
    u = propagate(gaussian_bump, Triangular(0.05), 1.0, 1.0)
    assert u.mass() == pytest.approx(gaussian_bump.mass(), rel=1e-7)


def test_propagate_rejects_other_grids(gaussian_bump, heat_grid) -> None:
    with pytest.raises(GridMismatchError):
        propagate(gaussian_bump, Dirac(), 1.0, 1.0, grid=heat_grid)
    with pytest.raises(GridMismatchError):
        sup_norm_distance(gaussian_bump, SolutionSlice(heat_grid, np.zeros(4096)))


def test_solution_rejects_bad_values(coarse_grid) -> None:
    with pytest.raises(GridMismatchError):
        SolutionSlice(coarse_grid, np.zeros(10))
    values = np.zeros(coarse_grid.n_points)
    values[3] = np.nan
    with pytest.raises(InvalidParameterError):
        SolutionSlice(coarse_grid, values)


def test_central_stencils() -> None:
    for order in range(2, 9):
        weights = np.array(central_stencil(order))
        nodes = np.arange(len(weights)) - len(weights) // 2
        assert np.sum(weights) == pytest.approx(0.0, abs=1e-9)
        assert np.sum(weights * nodes**order) / math.factorial(order) == pytest.approx(1.0)


def test_kramers_moyal_operator_differentiates_polynomials(coarse_grid) -> None:
    operator = kramers_moyal_operator(coarse_grid, [0.5, 0.0, 2.0])
    x = coarse_grid.x
    result = operator @ (x**4)
    interior = slice(20, -20)
    np.testing.assert_allclose(result[interior], (6 * x**2 + 48)[interior], rtol=1e-6)


@pytest.mark.parametrize("order", [2, 3, 4])
@pytest.mark.parametrize("first", [0, -2])
def test_one_sided_stencils(order, first) -> None:
    weights = np.array(one_sided_stencil(order, first))
    nodes = np.arange(first, first + len(weights))
    assert len(weights) == len(central_stencil(order)) + 1
    for power in range(order + 2):
        expected = math.factorial(order) if power == order else 0.0
        assert np.sum(weights * nodes.astype(float) ** power) == pytest.approx(expected, abs=1e-6)


def test_operator_is_exact_up_to_the_boundary() -> None:
    grid = FourierGrid.from_length(64, 4.0)
    x = grid.x
    operator = kramers_moyal_operator(grid, [0.5, 0.1, 0.02])
    np.testing.assert_allclose(operator @ (1.0 + 2.0 * x), 0.0, atol=1e-5)
    np.testing.assert_allclose(operator @ (x**2), 1.0, atol=1e-5)
    np.testing.assert_allclose(operator @ (x**3), 3.0 * x + 0.6, atol=1e-4)


def test_frozen_boundary_rows() -> None:
    grid = FourierGrid.from_length(64, 4.0)
    coefficients = [0.5, 0.1, 0.02]
    band = boundary_band(coefficients)
    assert band == 5
    frozen = kramers_moyal_operator(grid, coefficients, boundary="frozen").toarray()
    one_sided = kramers_moyal_operator(grid, coefficients).toarray()
    assert not frozen[:band].any()
    assert not frozen[-band:].any()
    np.testing.assert_array_equal(frozen[band:-band], one_sided[band:-band])


def test_boundary_band_follows_the_widest_stencil() -> None:
    assert boundary_band([0.5, 0.0, 2.0]) == 5
    assert boundary_band([0.5]) == 4
    assert boundary_band([0.0, 0.0]) == 0


def test_operator_rejects_unknown_boundary(coarse_grid) -> None:
    with pytest.raises(InvalidParameterError):
        kramers_moyal_operator(coarse_grid, [0.5], boundary="periodic")
    with pytest.raises(GridDomainError):
        kramers_moyal_operator(FourierGrid.from_length(8, 1.0), [0.5])


def test_solver_keeps_a_linear_payoff(coarse_grid) -> None:
    u0 = SolutionSlice(coarse_grid, 1.0 + 0.5 * coarse_grid.x)
    u = solve_kramers_moyal(u0, _km_pde(Triangular(0.05), 4), 1.0, 0.05, 1.0)
    np.testing.assert_allclose(u.values, u0.values, atol=1e-8)


def test_time_step_shrinks_with_order(coarse_grid) -> None:
    steps = [stable_time_step(coarse_grid, 1.0, 0.05, order) for order in (2, 4, 6)]
    assert steps[0] > steps[1] > steps[2]


def test_second_order_solver_is_the_heat_equation(coarse_grid, gaussian_bump) -> None:
    spectral = propagate(gaussian_bump, Dirac(), 1.0, 1.0)
    finite_difference = solve_kramers_moyal(gaussian_bump, _km_pde(Dirac(), 2), 1.0, 0.0, 1.0)
    assert sup_norm_distance(spectral, finite_difference) < 1e-4


def test_solver_converges_to_the_spectral_solution(coarse_grid, gaussian_bump) -> None:
    H = Triangular(0.05)
    spectral = propagate(gaussian_bump, H, 1.0, 1.0)
    gaps = {
        N: sup_norm_distance(
            spectral, solve_kramers_moyal(gaussian_bump, _km_pde(H, N), 1.0, 0.05, 1.0)
        )
        for N in (2, 3, 4, 6)
    }
    assert gaps[3] < gaps[2]
    assert gaps[4] <= 1e-3
    assert gaps[6] < gaps[4]


def test_zero_stays_zero(coarse_grid) -> None:
    zero = SolutionSlice(coarse_grid, np.zeros(coarse_grid.n_points))
    u = solve_kramers_moyal(zero, _km_pde(Triangular(0.05), 4), 1.0, 0.05, 0.1)
    assert np.all(u.values == 0.0)


def test_solver_detects_blow_up(coarse_grid, gaussian_bump) -> None:
    backwards_heat = BackwardPDE(2, (coeff_poly({(2, 0): -1}),))
    with pytest.raises(NumericalInstabilityError):
        solve_kramers_moyal(gaussian_bump, backwards_heat, 1.0, 0.0, 1.0)


def test_solver_rejects_high_orders(gaussian_bump) -> None:
    with pytest.raises(InvalidParameterError):
        solve_kramers_moyal(gaussian_bump, _km_pde(Triangular(0.05), 9), 1.0, 0.05, 1.0)
