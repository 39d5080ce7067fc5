"""Command line front end for quantum_kolmogorov."""

from __future__ import annotations

import argparse
import json
import logging
from collections.abc import Callable, Sequence
from functools import cache
from importlib.resources import files
from pathlib import Path
from typing import Any

import colorlog

from .config import RunConfig
from .const import (
    COMMAND_ALGEBRA_CHECK,
    COMMAND_DERIVE,
    COMMAND_GAUGE,
    COMMAND_KERNEL,
    COMMAND_MOMENTS,
    COMMAND_SOLVE,
    DOMAIN,
    EXIT_BAD_INPUT,
    EXIT_CHECK_FAILED,
    EXIT_GRID,
    EXIT_INSTABILITY,
    EXIT_OK,
    KERNEL_KINDS,
    LOGGER,
    METHOD_SPECTRAL,
)
from .data import atomic_write_text, csv_text, format_float, write_json
from .exceptions import (
    GridDomainError,
    InvalidParameterError,
    NumericalInstabilityError,
    QuantumKolmogorovError,
)
from .gauge import GaugeConfig, PhaseGrid, violation_sweep
from .kernel_engine import (
    FourierGrid,
    SolutionSlice,
    build_kernel,
    propagate,
    solve_kramers_moyal,
    sup_norm_distance,
)
from .moment_calculus import reconcile
from .nc_algebra import algebra_report, load_fixture
from .nonlocality import NonlocalityFunction, has_symbolic_moments, moment_polys
from .qsde_algebra import derive_backward_pde, derive_fokker_planck, kramers_moyal_pde

LOG_FORMAT = "%(log_color)s%(levelname)-8s%(reset)s %(name)s: %(message)s"


@cache
def _messages() -> dict[str, Any]:
    return json.loads(
        files(__package__).joinpath("translations", "en.json").read_text(encoding="utf-8")
    )


def message(section: str, key: str, **kwargs: Any) -> str:
    """User-facing text from translations/en.json."""
    return _messages()[section][key].format(**kwargs)


def setup_logging(verbose: bool = False) -> None:
    """Colored stderr logging on the package logger."""
    if not any(getattr(handler, "_qk_cli", False) for handler in LOGGER.handlers):
        handler = colorlog.StreamHandler()
        handler.setFormatter(colorlog.ColoredFormatter(LOG_FORMAT))
        handler._qk_cli = True
        LOGGER.addHandler(handler)
    LOGGER.setLevel(logging.DEBUG if verbose else logging.INFO)


def _kernel_grid(cfg: RunConfig, H: NonlocalityFunction) -> FourierGrid:
    if cfg.length is not None:
        return FourierGrid.from_length(cfg.grid_size(), cfg.length)
    return FourierGrid.default_for(cfg.sigma, cfg.tau, H.length_scale, cfg.grid_size())


def _written(path: Path) -> None:
    LOGGER.info(message("result", "written", path=path))


def cmd_derive(cfg: RunConfig) -> int:
    """Write the backward and Fokker-Planck coefficients up to order N."""
    backward = derive_backward_pde(cfg.order)
    forward = derive_fokker_planck(cfg.order)
    write_json(
        cfg.output,
        {"backward": backward.to_dict(), "fokker_planck": forward.to_dict()},
    )
    for k in range(2, cfg.order + 1):
        print(f"k={k} backward: {backward.coefficient(k).as_expr()}")
    _written(cfg.output)
    return EXIT_OK


def cmd_kernel(cfg: RunConfig) -> int:
    """Build K^H_τ, write it with its sidecar and print its moments."""
    H = cfg.nonlocality()
    kernel = build_kernel(H, cfg.sigma, cfg.tau, _kernel_grid(cfg, H))
    sidecar = kernel.to_csv(cfg.output)
    moments = [kernel.moment(k) for k in range(1, 5)]
    print(f"mass {format_float(kernel.mass())}")
    for k, value in enumerate(moments, start=1):
        print(f"mu_{k} {format_float(value)}")
    print(f"variance {format_float(moments[1] - moments[0] ** 2)}")
    print(f"negative_mass {format_float(kernel.negative_mass())}")
    print(f"excess_kurtosis {format_float(kernel.excess_kurtosis())}")
    _written(cfg.output)
    _written(sidecar)
    return EXIT_OK


def cmd_moments(cfg: RunConfig) -> int:
    """Reconcile series, partition and quadrature kernel moments."""
    H = cfg.nonlocality()
    grid = _kernel_grid(cfg, H) if H.has_char_fn else None
    rows = reconcile(H, cfg.sigma, cfg.tau, cfg.order, grid)
    write_json(cfg.output, [row.to_dict() for row in rows])
    for row in rows:
        quadrature = "-" if row.quadrature is None else format_float(row.quadrature)
        rel_gap = "-" if row.rel_gap is None else f"{row.rel_gap:.3e}"
        print(f"n={row.n} series={row.series} partition={row.partition} "
              f"quadrature={quadrature} rel_gap={rel_gap}"
              + ("" if row.agree else " DISAGREE"))
    _written(cfg.output)
    return EXIT_OK


def _solve(cfg: RunConfig, u0: SolutionSlice, H: NonlocalityFunction, method: Any) -> SolutionSlice:
    if method.name == METHOD_SPECTRAL:
        return propagate(u0, H, cfg.sigma, cfg.tau)
    pde = kramers_moyal_pde(moment_polys(H, method.order - 2), method.order)
    # numeric moments already carry the width of H
    eps = cfg.eps if has_symbolic_moments(H) else H.length_scale
    return solve_kramers_moyal(u0, pde, cfg.sigma, eps, cfg.tau)


def cmd_solve(cfg: RunConfig) -> int:
    """Propagate a terminal condition with one or more methods."""
    u0 = SolutionSlice.from_csv(cfg.payoff)
    H = cfg.nonlocality()
    solutions = [(method, _solve(cfg, u0, H, method)) for method in cfg.methods]

    for method, solution in solutions:
        path = cfg.output
        if len(solutions) > 1:
            label = method.label.replace(":", "")
            path = cfg.output.with_name(f"{cfg.output.stem}_{label}{cfg.output.suffix}")
        solution.to_csv(path)
        _written(path)

    (first, reference), *others = solutions
    for method, solution in others:
        value = format_float(sup_norm_distance(reference, solution))
        print(message("result", "disagreement", first=first.label, second=method.label, value=value))
    return EXIT_OK


def cmd_algebra_check(cfg: RunConfig) -> int:
    """Check the operator algebra laws on a fixture."""
    grid, operators = load_fixture(cfg.fixture, cfg.n_points)
    try:
        _, refined = load_fixture(cfg.fixture, 2 * grid.n_points)
    except GridDomainError as exception:
        LOGGER.warning("skipping the refinement check: %s", exception)
        refined = None
    report = algebra_report(grid, operators, refined, trials=cfg.trials, seed=cfg.seed)
    write_json(cfg.output, report)
    _written(cfg.output)
    if not report["passed"]:
        failed = ", ".join(name for name, ok in report["checks"].items() if not ok)
        LOGGER.error(message("error", "check_failed", detail=failed))
        return EXIT_CHECK_FAILED
    print(message("result", "passed"))
    return EXIT_OK


def cmd_gauge(cfg: RunConfig) -> int:
    """Tabulate the translation violation against ε."""
    gauge = GaugeConfig.from_csv(cfg.v_csv, float(cfg.sigma), 0.0)
    low, high = gauge.x_range
    grid = PhaseGrid(
        xdot=(-cfg.xdot_max, cfg.xdot_max, cfg.phase_points),
        x=(low, high, cfg.phase_points),
    )
    reports = violation_sweep(gauge, [float(eps) for eps in cfg.eps_list], grid, cfg.jobs)
    atomic_write_text(
        cfg.output,
        csv_text(
            ["eps", "sup_violation"],
            [[report.eps for report in reports], [report.sup_violation for report in reports]],
        ),
    )
    sidecar = cfg.output.with_suffix(".json")
    write_json(sidecar, [report.to_dict() for report in reports])
    for report in reports:
        print(f"eps={format_float(report.eps)} sup_violation={format_float(report.sup_violation)}")
    _written(cfg.output)
    _written(sidecar)
    return EXIT_OK


COMMANDS: dict[str, Callable[[RunConfig], int]] = {
    COMMAND_DERIVE: cmd_derive,
    COMMAND_KERNEL: cmd_kernel,
    COMMAND_MOMENTS: cmd_moments,
    COMMAND_SOLVE: cmd_solve,
    COMMAND_ALGEBRA_CHECK: cmd_algebra_check,
    COMMAND_GAUGE: cmd_gauge,
}


def build_parser() -> argparse.ArgumentParser:
    """Parser with one subcommand per operation."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key=value configuration file")
    common.add_argument("--output", help="output path")
    common.add_argument("--jobs", help="worker threads for sweeps")
    common.add_argument("--seed", help="seed for randomized norm estimates")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    physics = argparse.ArgumentParser(add_help=False)
    physics.add_argument("--sigma", help="volatility σ")
    physics.add_argument("--tau", help="Wick time τ")
    physics.add_argument("--eps", help="nonlocality length scale ε")
    physics.add_argument("--kind", choices=KERNEL_KINDS, help="nonlocality H")
    physics.add_argument("--density-csv", dest="density_csv", help="tabulated H (y, density)")
    physics.add_argument("-n", "--n-points", dest="n", help="grid size, a power of two")
    physics.add_argument("--length", help="domain length L")

    parser = argparse.ArgumentParser(prog=DOMAIN, description=__doc__)
    subparsers = parser.add_subparsers(dest="command", required=True)

    derive = subparsers.add_parser(COMMAND_DERIVE, parents=[common], help="derive the PDE coefficients")
    derive.add_argument("-N", "--order", help="truncation order N ≥ 2")

    subparsers.add_parser(COMMAND_KERNEL, parents=[common, physics], help="build a kernel")

    moments = subparsers.add_parser(
        COMMAND_MOMENTS, parents=[common, physics], help="reconcile kernel moments"
    )
    moments.add_argument("-N", "--order", help="highest moment order")

    solve = subparsers.add_parser(COMMAND_SOLVE, parents=[common, physics], help="propagate a payoff")
    solve.add_argument("--payoff", help="terminal condition CSV (x, value)")
    solve.add_argument("--method", help="spectral, kramers_moyal:N, or both comma-separated")

    algebra = subparsers.add_parser(
        COMMAND_ALGEBRA_CHECK, parents=[common], help="check the operator algebra"
    )
    algebra.add_argument("--fixture", help="operator fixture JSON")
    algebra.add_argument("-n", "--n-points", dest="n", help="grid size, a power of two")
    algebra.add_argument("--trials", help="random starts for norm estimates")

    gauge = subparsers.add_parser(COMMAND_GAUGE, parents=[common], help="gauge translation study")
    gauge.add_argument("--sigma", help="volatility σ")
    gauge.add_argument("--eps-list", dest="eps_list", help="comma-separated ε values")
    gauge.add_argument("--v-csv", dest="v_csv", help="gauge potential CSV (x, v)")
    gauge.add_argument("--xdot-max", dest="xdot_max", help="velocity grid half-width")
    gauge.add_argument("--phase-points", dest="phase_points", help="points per phase axis")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Run one command and return its exit code."""
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    overrides = {
        key: value
        for key, value in vars(args).items()
        if key not in ("command", "config", "verbose")
    }

    try:
        cfg = RunConfig.from_sources(args.command, args.config, overrides)
        LOGGER.info(cfg.display())
        return COMMANDS[args.command](cfg)
    except InvalidParameterError as exception:
        LOGGER.error(message("error", "bad_input", detail=exception))
        return EXIT_BAD_INPUT
    except GridDomainError as exception:
        LOGGER.error(message("error", "grid", detail=exception))
        return EXIT_GRID
    except NumericalInstabilityError as exception:
        LOGGER.error(message("error", "instability", detail=exception))
        return EXIT_INSTABILITY
    except QuantumKolmogorovError as exception:
        LOGGER.exception(message("error", "unknown", detail=exception))
        return EXIT_CHECK_FAILED
