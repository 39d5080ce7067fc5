"""Grid realization of the algebra of nonlocal operators (a(x), H(z;x)).

An operator multiplies by the symbol a(x) after averaging ψ over displacements
drawn from the row distribution H(·;x):

    (a, H)ψ(x) = a(x) Σ_z ψ(x − z) H(z; x) Δx.

Kernel fields are stored as cell weights W[i, c] = H(c·Δx; x_i)·Δx with the
displacement index c taken modulo n, so the grid delta is the exact row
[1, 0, ..., 0]. Composition follows

    H_ab(z; x) = ∫ H_a(u; x) b(x − u) H_b(z − u; x − u) du,

which on the grid is a gather, a matrix product and a gather back.
"""

from __future__ import annotations

import itertools
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np
from sympy import Symbol, lambdify
from sympy.core.sympify import SympifyError
from sympy.parsing.sympy_parser import parse_expr

from .const import (
    ASSOCIATIVITY_FLOOR,
    ASSOCIATIVITY_TOL,
    BOUNDARY_MASS_TOL,
    DEFAULT_TRIALS,
    LOGGER,
    NONCOMMUTATIVITY_FACTOR,
    NORM_ITERATIONS,
    NORM_REL_TOL,
    ROW_MASS_TOL,
)
from .data import read_json, read_matrix_csv, write_json, write_matrix_csv
from .exceptions import (
    BoundaryMassError,
    GridDomainError,
    GridMismatchError,
    InvalidParameterError,
)
from .kernel_engine import FourierGrid
from .nonlocality import (
    Dirac,
    NonlocalityFunction,
    SelfConvolution,
    nonlocality_from_dict,
)

SymbolSpec = complex | np.ndarray | Callable[[np.ndarray], Any]

_X = Symbol("x", real=True)


def _check_same_grid(a: FourierGrid, b: FourierGrid) -> None:
    if a != b:
        raise GridMismatchError(
            f"operands live on different grids ({a.n_points} and {b.n_points} points)"
        )


def _symbol_values(grid: FourierGrid, symbol: SymbolSpec) -> np.ndarray:
    if callable(symbol):
        symbol = symbol(grid.x)
    values = np.broadcast_to(np.asarray(symbol, dtype=complex), (grid.n_points,)).copy()
    if not np.all(np.isfinite(values)):
        raise InvalidParameterError("operator symbol must be finite on the grid")
    return values


def _gather(grid: FourierGrid, table: np.ndarray) -> np.ndarray:
    """out[i, j] = table[i, (i − j) mod n]; maps fields to matrices and back."""
    i = np.arange(grid.n_points)
    return table[i[:, None], (i[:, None] - i[None, :]) % grid.n_points]


def _delta_row(grid: FourierGrid) -> np.ndarray:
    row = np.zeros(grid.n_points)
    row[0] = 1.0
    return row


def nonlocality_weights(grid: FourierGrid, H: NonlocalityFunction) -> np.ndarray:
    """Cell weights of H over the grid displacements, summing to one."""
    if isinstance(H, Dirac):
        return _delta_row(grid)
    if isinstance(H, SelfConvolution):
        base = nonlocality_weights(grid, H.base)
        weights = np.clip(np.fft.ifft(np.fft.fft(base) ** 2).real, 0.0, None)
    elif H.has_density:
        weights = np.asarray(H.density(grid.offsets), dtype=float) * grid.spacing
    else:
        raise InvalidParameterError(f"{H.kind} nonlocality has no density to place on a grid")

    total = float(np.sum(weights))
    if not total > 0:
        raise GridDomainError(
            f"{H.kind} nonlocality is narrower than the grid spacing {grid.spacing!r}"
        )
    weights = weights / total
    # the cell at displacement −L/2 is where periodic wraparound starts
    if abs(weights[grid.n_points // 2]) > BOUNDARY_MASS_TOL * np.max(np.abs(weights)):
        raise BoundaryMassError(
            f"{H.kind} nonlocality is too wide for a domain of length {grid.length!r}"
        )
    return weights


@dataclass(frozen=True, eq=False)
class StateVector:
    """ψ(x) on a grid."""

    grid: FourierGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.grid.n_points,):
            raise GridMismatchError(
                f"expected {self.grid.n_points} values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError("state contains NaN or infinite values")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: FourierGrid, fn: Callable[[np.ndarray], Any]) -> StateVector:
        """Sample fn(x) on the grid."""
        return cls(grid, _symbol_values(grid, fn))

    def norm(self) -> float:
        """sqrt(Σ |ψ|² Δx)."""
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.spacing))


@dataclass(frozen=True, eq=False)
class NonlocalOperator:
    """The pair (a(x), H(z;x)) on a grid."""

    grid: FourierGrid
    symbol: np.ndarray
    weights: np.ndarray
    source: dict[str, Any] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        n = self.grid.n_points
        symbol = np.asarray(self.symbol, dtype=complex)
        weights = np.asarray(self.weights)
        if symbol.shape != (n,) or weights.shape != (n, n):
            raise GridMismatchError(
                f"operator arrays do not match a grid of {n} points"
            )
        object.__setattr__(self, "symbol", symbol)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def identity(cls, grid: FourierGrid) -> NonlocalOperator:
        """(1, δ)."""
        return cls.multiplication(grid, 1.0)

    @classmethod
    def multiplication(cls, grid: FourierGrid, symbol: SymbolSpec) -> NonlocalOperator:
        """(a, δ): pointwise multiplication by a(x)."""
        weights = np.tile(_delta_row(grid), (grid.n_points, 1))
        return cls(grid, _symbol_values(grid, symbol), weights, {"kind": "dirac"})

    @classmethod
    def from_nonlocality(
        cls, grid: FourierGrid, H: NonlocalityFunction, symbol: SymbolSpec = 1.0
    ) -> NonlocalOperator:
        """(a, H) with the same H at every x."""
        weights = np.tile(nonlocality_weights(grid, H), (grid.n_points, 1))
        return cls._validated(grid, _symbol_values(grid, symbol), weights, H.to_dict())

    @classmethod
    def from_kernel_family(
        cls,
        grid: FourierGrid,
        family: Callable[[float], NonlocalityFunction],
        symbol: SymbolSpec = 1.0,
    ) -> NonlocalOperator:
        """(a, H(·;x)) with row x_i drawn from family(x_i)."""
        weights = np.stack([nonlocality_weights(grid, family(float(x))) for x in grid.x])
        return cls._validated(grid, _symbol_values(grid, symbol), weights, None)

    @classmethod
    def from_kernel_field(
        cls, grid: FourierGrid, kernel_field: np.ndarray, symbol: SymbolSpec = 1.0
    ) -> NonlocalOperator:
        """(a, H) from a dense density field H[i, c] in displacement-offset order."""
        weights = np.asarray(kernel_field, dtype=float) * grid.spacing
        return cls._validated(grid, _symbol_values(grid, symbol), weights, None)

    @classmethod
    def _validated(
        cls,
        grid: FourierGrid,
        symbol: np.ndarray,
        weights: np.ndarray,
        source: dict[str, Any] | None,
    ) -> NonlocalOperator:
        if weights.shape != (grid.n_points, grid.n_points):
            raise GridMismatchError(
                f"kernel field shape {weights.shape} does not match {grid.n_points} points"
            )
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise InvalidParameterError("kernel rows must be probability distributions")
        worst = float(np.max(np.abs(weights.sum(axis=1) - 1.0)))
        if worst > ROW_MASS_TOL:
            raise InvalidParameterError(
                f"kernel rows must sum to one (worst deviation {worst:.3g})"
            )
        return cls(grid, symbol, weights, source)

    @property
    def kernel_field(self) -> np.ndarray:
        """H(z; x) as a density, rows indexed by x, columns by displacement."""
        return self.weights / self.grid.spacing

    def row_masses(self) -> np.ndarray:
        """Σ_z H(z; x) Δx for every x."""
        return self.weights.sum(axis=1)

    @cached_property
    def matrix(self) -> np.ndarray:
        """M[i, j] = a(x_i)·W[i, (i − j) mod n], so (Mψ)_i is the operator action."""
        matrix = self.symbol[:, None] * _gather(self.grid, self.weights)
        matrix.setflags(write=False)
        return matrix


def apply(A: NonlocalOperator, psi: StateVector) -> StateVector:
    """a(x)·Σ_c ψ(x − z_c) H(z_c; x) Δx, periodic in x."""
    _check_same_grid(A.grid, psi.grid)
    return StateVector(A.grid, A.matrix @ psi.values)


def compose(A: NonlocalOperator, B: NonlocalOperator) -> NonlocalOperator:
    """The operator AB; its symbol is a(x)."""
    _check_same_grid(A.grid, B.grid)
    grid = A.grid
    product = _gather(grid, A.weights) @ B.matrix
    return NonlocalOperator(grid, A.symbol, _gather(grid, product))


def involution(A: NonlocalOperator) -> NonlocalOperator:
    """(ā, H)."""
    return NonlocalOperator(A.grid, np.conj(A.symbol), A.weights, A.source)


def sup_norm(phi: StateVector, psi: StateVector) -> float:
    """max |φ − ψ|."""
    _check_same_grid(phi.grid, psi.grid)
    return float(np.max(np.abs(phi.values - psi.values)))


def operator_distance(A: NonlocalOperator, B: NonlocalOperator) -> float:
    """max |a_A W_A − a_B W_B| entrywise, i.e. the gap between the grid matrices."""
    _check_same_grid(A.grid, B.grid)
    return float(np.max(np.abs(A.matrix - B.matrix)))


def commutator_norm(A: NonlocalOperator, B: NonlocalOperator) -> float:
    """operator_distance(AB, BA)."""
    return operator_distance(compose(A, B), compose(B, A))


def operator_norm_estimate(
    A: NonlocalOperator,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    iterations: int = NORM_ITERATIONS,
) -> float:
    """Largest ‖Aψ‖/‖ψ‖ found by power iteration on A*A from random starts.

    Trials are drawn in sequence from one seeded generator, so the estimate
    for k + 1 trials is never below the estimate for k.
    """
    if trials < 1:
        raise InvalidParameterError(f"trials must be at least 1, got {trials}")
    rng = np.random.default_rng(seed)
    matrix = A.matrix
    gram = matrix.conj().T @ matrix
    best = 0.0
    for _ in range(trials):
        v = rng.standard_normal(A.grid.n_points) + 1j * rng.standard_normal(A.grid.n_points)
        v /= np.linalg.norm(v)
        estimate = 0.0
        for _ in range(iterations):
            w = gram @ v
            size = float(np.linalg.norm(w))
            if size == 0.0:
                break
            v = w / size
            previous, estimate = estimate, float(np.linalg.norm(matrix @ v))
            if abs(estimate - previous) <= NORM_REL_TOL * estimate:
                break
        best = max(best, estimate)
    return best


def _parse_expression(text: str | float) -> Any:
    try:
        expression = parse_expr(str(text), local_dict={"x": _X})
    except (SympifyError, SyntaxError, TypeError) as exception:
        raise InvalidParameterError(
            f"cannot parse expression {text!r}: {exception}"
        ) from exception
    unknown = expression.free_symbols - {_X}
    if unknown:
        raise InvalidParameterError(f"expression {text!r} uses unknown symbols {unknown}")
    return expression


def _as_function(expression: Any) -> Callable[[np.ndarray], np.ndarray]:
    fn = lambdify(_X, expression, "numpy")
    return lambda x: np.broadcast_to(fn(x), np.shape(x))


def _symbol_from_spec(grid: FourierGrid, spec: Any) -> np.ndarray:
    if isinstance(spec, Mapping) and "values" in spec:
        pairs = np.asarray(spec["values"], dtype=float)
        if pairs.shape != (grid.n_points, 2):
            raise GridMismatchError(
                f"symbol has {len(pairs)} samples, grid has {grid.n_points}"
            )
        return pairs[:, 0] + 1j * pairs[:, 1]
    expr = spec["expr"] if isinstance(spec, Mapping) else spec
    return _symbol_values(grid, _as_function(_parse_expression(expr)))


def _operator_from_spec(
    grid: FourierGrid, spec: Mapping[str, Any], base: Path
) -> NonlocalOperator:
    symbol = _symbol_from_spec(grid, spec.get("symbol", 1))
    kernel = dict(spec.get("kernel", {"kind": "dirac"}))
    if "field_csv" in kernel:
        field_values = read_matrix_csv(base / kernel["field_csv"])
        return NonlocalOperator.from_kernel_field(grid, field_values, symbol)
    if "eps" not in kernel:
        return NonlocalOperator.from_nonlocality(grid, nonlocality_from_dict(kernel), symbol)

    eps = _parse_expression(kernel["eps"])
    if _X not in eps.free_symbols:
        kernel["eps"] = float(eps)
        return NonlocalOperator.from_nonlocality(grid, nonlocality_from_dict(kernel), symbol)
    eps_of_x = _as_function(eps)
    return NonlocalOperator.from_kernel_family(
        grid,
        lambda x: nonlocality_from_dict({**kernel, "eps": float(eps_of_x(x))}),
        symbol,
    )


def load_fixture(
    path: str | Path, n_points: int | None = None
) -> tuple[FourierGrid, dict[str, NonlocalOperator]]:
    """Read named operators from a fixture, optionally on a different grid size."""
    path = Path(path)
    document = read_json(path)
    try:
        grid = FourierGrid.from_length(
            int(n_points or document["n"]), float(document["L"])
        )
        operators = {
            name: _operator_from_spec(grid, spec, path.parent)
            for name, spec in document["operators"].items()
        }
    except (KeyError, TypeError) as exception:
        raise InvalidParameterError(
            f"malformed operator fixture {path}: {exception}"
        ) from exception
    LOGGER.debug("loaded %d operators from %s on n=%d", len(operators), path, grid.n_points)
    return grid, operators


def save_fixture(
    path: str | Path, grid: FourierGrid, operators: Mapping[str, NonlocalOperator]
) -> None:
    """Write operators as symbol samples plus a kernel kind or a dense field CSV."""
    path = Path(path)
    entries = {}
    for name, operator in operators.items():
        symbol = {"values": [[float(z.real), float(z.imag)] for z in operator.symbol]}
        if operator.source is not None:
            kernel = dict(operator.source)
        else:
            if np.iscomplexobj(operator.weights) and np.any(operator.weights.imag != 0):
                raise InvalidParameterError(f"operator {name} has a complex kernel field")
            csv_name = f"{path.stem}_{name}_kernel.csv"
            write_matrix_csv(path.parent / csv_name, operator.kernel_field.real)
            kernel = {"field_csv": csv_name}
        entries[name] = {"symbol": symbol, "kernel": kernel}
    write_json(path, {"n": grid.n_points, "L": grid.length, "operators": entries})


def _default_state(grid: FourierGrid) -> StateVector:
    return StateVector.from_function(
        grid, lambda x: np.exp(-0.5 * x**2) * (1.0 + 0.5j * np.sin(x))
    )


def _associativity_defect(operators: Mapping[str, NonlocalOperator]) -> float:
    values = list(operators.values())
    if len(values) >= 3:
        triples = itertools.permutations(values, 3)
    else:
        triples = itertools.product(values, repeat=3)
    worst = 0.0
    for A, B, C in triples:
        left = compose(A, compose(B, C))
        right = compose(compose(A, B), C)
        worst = max(worst, operator_distance(left, right))
    return worst


def algebra_report(
    grid: FourierGrid,
    operators: Mapping[str, NonlocalOperator],
    refined: Mapping[str, NonlocalOperator] | None = None,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
) -> dict[str, Any]:
    """Unit, involution, representation, associativity and noncommutativity checks.

    `refined` holds the same operators on a grid with half the spacing; the
    associativity defect must stay within tolerance there and either halve or
    sit at rounding level.
    """
    if not operators:
        raise InvalidParameterError("algebra check needs at least one operator")
    identity = NonlocalOperator.identity(grid)
    psi = _default_state(grid)

    unit = {
        name: {
            "left": operator_distance(compose(identity, A), A),
            "right": operator_distance(compose(A, identity), A),
        }
        for name, A in operators.items()
    }
    involutive = all(
        np.array_equal(involution(involution(A)).symbol, A.symbol)
        for A in operators.values()
    )
    representation = max(
        sup_norm(apply(compose(A, B), psi), apply(A, apply(B, psi)))
        for A, B in itertools.product(operators.values(), repeat=2)
    )
    defect = _associativity_defect(operators)
    defect_refined = _associativity_defect(refined) if refined else None

    pairs = list(itertools.combinations(operators, 2))
    commutators = {
        f"{a},{b}": commutator_norm(operators[a], operators[b]) for a, b in pairs
    }
    witness = max(commutators.items(), key=lambda item: item[1], default=(None, 0.0))
    threshold = NONCOMMUTATIVITY_FACTOR * ASSOCIATIVITY_TOL

    associativity_ok = defect <= ASSOCIATIVITY_TOL
    if defect_refined is not None:
        associativity_ok = (
            associativity_ok
            and defect_refined <= ASSOCIATIVITY_TOL
            and (defect_refined <= defect / 2 or defect_refined <= ASSOCIATIVITY_FLOOR)
        )
    checks = {
        "unit_laws": all(v["left"] == 0.0 and v["right"] == 0.0 for v in unit.values()),
        "involution": involutive,
        "representation": representation <= ASSOCIATIVITY_TOL,
        "associativity": associativity_ok,
        "noncommutativity": len(operators) < 2 or witness[1] >= threshold,
    }
    report = {
        "grid": grid.to_dict(),
        "unit_laws": unit,
        "involution": involutive,
        "representation_defect": representation,
        "associativity": {
            "defect": defect,
            "defect_refined": defect_refined,
            "tolerance": ASSOCIATIVITY_TOL,
        },
        "noncommutativity": {
            "commutator_norms": commutators,
            "witness": witness[0],
            "threshold": threshold,
        },
        "operator_norms": {
            name: operator_norm_estimate(A, trials=trials, seed=seed)
            for name, A in operators.items()
        },
        "checks": checks,
        "passed": all(checks.values()),
    }
    LOGGER.info(
        "algebra check on n=%d: %s",
        grid.n_points,
        ", ".join(f"{name}={'ok' if ok else 'FAILED'}" for name, ok in checks.items()),
    )
    return report
