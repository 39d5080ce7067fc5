"""Run configuration for the quantum_kolmogorov command line."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import voluptuous as vol

from .const import (
    COMMAND_ALGEBRA_CHECK,
    COMMAND_DERIVE,
    COMMAND_GAUGE,
    COMMAND_SOLVE,
    CONF_DENSITY_CSV,
    CONF_EPS,
    CONF_EPS_LIST,
    CONF_FIXTURE,
    CONF_JOBS,
    CONF_KIND,
    CONF_LENGTH,
    CONF_METHOD,
    CONF_N_POINTS,
    CONF_ORDER,
    CONF_OUTPUT,
    CONF_PAYOFF,
    CONF_PHASE_POINTS,
    CONF_SEED,
    CONF_SIGMA,
    CONF_TAU,
    CONF_TRIALS,
    CONF_V_CSV,
    CONF_XDOT_MAX,
    DEFAULT_EPS,
    DEFAULT_EPS_LIST,
    DEFAULT_JOBS,
    DEFAULT_METHOD,
    DEFAULT_MOMENT_ORDER,
    DEFAULT_N_POINTS,
    DEFAULT_OUTPUTS,
    DEFAULT_PHASE_POINTS,
    DEFAULT_SEED,
    DEFAULT_SIGMA,
    DEFAULT_TAU,
    DEFAULT_TRIALS,
    DEFAULT_XDOT_MAX,
    KERNEL_KINDS,
    KIND_DIRAC,
    KIND_GAUSSIAN,
    KIND_TABULATED,
    KIND_TRIANGULAR,
    KM_MAX_ORDER,
    LOGGER,
    METHOD_KRAMERS_MOYAL,
    METHOD_SPECTRAL,
)
from .exceptions import InvalidParameterError
from .nonlocality import Dirac, Gaussian, NonlocalityFunction, Tabulated, Triangular


def exact_number(value: Any) -> Fraction:
    """Parse decimal text such as '0.05' or '1e-3' to an exact Fraction."""
    try:
        return Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError) as exception:
        raise vol.Invalid(f"not a number: {value!r}") from exception


def positive_number(value: Any) -> Fraction:
    """Exact number > 0."""
    number = exact_number(value)
    if number <= 0:
        raise vol.Invalid(f"must be positive, got {value!r}")
    return number


def nonnegative_number(value: Any) -> Fraction:
    """Exact number ≥ 0."""
    number = exact_number(value)
    if number < 0:
        raise vol.Invalid(f"must be nonnegative, got {value!r}")
    return number


def number_list(value: Any) -> tuple[Fraction, ...]:
    """Comma-separated nonnegative numbers."""
    if isinstance(value, str):
        value = [item for item in value.split(",") if item.strip()]
    numbers = tuple(nonnegative_number(item) for item in value)
    if not numbers:
        raise vol.Invalid("expected at least one value")
    return numbers


def power_of_two(value: Any) -> int:
    """Positive power-of-two integer."""
    n = vol.Coerce(int)(value)
    if n < 2 or n & (n - 1):
        raise vol.Invalid(f"grid size must be a power of two, got {value!r}")
    return n


@dataclass(frozen=True)
class SolveMethod:
    """One propagation method; order is the Kramers-Moyal truncation."""

    name: str
    order: int | None = None

    @property
    def label(self) -> str:
        """Text form, e.g. 'kramers_moyal:4'."""
        return self.name if self.order is None else f"{self.name}:{self.order}"


def solve_methods(value: Any) -> tuple[SolveMethod, ...]:
    """'spectral', 'kramers_moyal:N' or a comma-separated list of both."""
    if isinstance(value, tuple) and all(isinstance(m, SolveMethod) for m in value):
        return value
    methods = []
    for item in str(value).split(","):
        name, _, order = item.strip().partition(":")
        if name == METHOD_SPECTRAL and not order:
            methods.append(SolveMethod(METHOD_SPECTRAL))
        elif name == METHOD_KRAMERS_MOYAL:
            N = vol.All(vol.Coerce(int), vol.Range(min=2, max=KM_MAX_ORDER))(order or 4)
            methods.append(SolveMethod(METHOD_KRAMERS_MOYAL, N))
        else:
            raise vol.Invalid(f"unknown method {item.strip()!r}")
    return tuple(methods)


PARAMETER_SCHEMA = vol.Schema(
    {
        vol.Optional(CONF_SIGMA): positive_number,
        vol.Optional(CONF_TAU): positive_number,
        vol.Optional(CONF_EPS): nonnegative_number,
        vol.Optional(CONF_EPS_LIST): number_list,
        vol.Optional(CONF_KIND): vol.In(KERNEL_KINDS),
        vol.Optional(CONF_DENSITY_CSV): vol.Coerce(str),
        vol.Optional(CONF_N_POINTS): power_of_two,
        vol.Optional(CONF_LENGTH): vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False)),
        vol.Optional(CONF_ORDER): vol.All(vol.Coerce(int), vol.Range(min=0)),
        vol.Optional(CONF_METHOD): solve_methods,
        vol.Optional(CONF_PAYOFF): vol.Coerce(str),
        vol.Optional(CONF_FIXTURE): vol.Coerce(str),
        vol.Optional(CONF_V_CSV): vol.Coerce(str),
        vol.Optional(CONF_OUTPUT): vol.Coerce(str),
        vol.Optional(CONF_JOBS): vol.All(vol.Coerce(int), vol.Range(min=1)),
        vol.Optional(CONF_SEED): vol.All(vol.Coerce(int), vol.Range(min=0)),
        vol.Optional(CONF_TRIALS): vol.All(vol.Coerce(int), vol.Range(min=1)),
        vol.Optional(CONF_XDOT_MAX): vol.All(vol.Coerce(float), vol.Range(min=0, min_included=False)),
        vol.Optional(CONF_PHASE_POINTS): vol.All(vol.Coerce(int), vol.Range(min=2)),
    }
)

# keys a command cannot run without, and per-command bounds
COMMAND_SCHEMAS = {
    COMMAND_DERIVE: vol.Schema(
        {vol.Required(CONF_ORDER): vol.Range(min=2)}, extra=vol.ALLOW_EXTRA
    ),
    COMMAND_SOLVE: vol.Schema({vol.Required(CONF_PAYOFF): str}, extra=vol.ALLOW_EXTRA),
    COMMAND_ALGEBRA_CHECK: vol.Schema(
        {vol.Required(CONF_FIXTURE): str}, extra=vol.ALLOW_EXTRA
    ),
    COMMAND_GAUGE: vol.Schema({vol.Required(CONF_V_CSV): str}, extra=vol.ALLOW_EXTRA),
}

DEFAULTS: dict[str, Any] = {
    CONF_SIGMA: DEFAULT_SIGMA,
    CONF_TAU: DEFAULT_TAU,
    CONF_EPS: DEFAULT_EPS,
    CONF_EPS_LIST: DEFAULT_EPS_LIST,
    CONF_KIND: KIND_GAUSSIAN,
    CONF_ORDER: DEFAULT_MOMENT_ORDER,
    CONF_METHOD: DEFAULT_METHOD,
    CONF_JOBS: DEFAULT_JOBS,
    CONF_SEED: DEFAULT_SEED,
    CONF_TRIALS: DEFAULT_TRIALS,
    CONF_XDOT_MAX: DEFAULT_XDOT_MAX,
    CONF_PHASE_POINTS: DEFAULT_PHASE_POINTS,
}


def load_config_file(path: str | Path) -> dict[str, str]:
    """Read flat key=value lines; '#' starts a comment."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exception:
        raise InvalidParameterError(f"cannot read config {path}: {exception}") from exception

    values: dict[str, str] = {}
    for number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise InvalidParameterError(f"{path}:{number}: expected key=value, got {raw!r}")
        key = key.strip().lower()
        if key in values:
            LOGGER.warning("%s:%d: %s set twice, keeping the later value", path, number, key)
        values[key] = value.strip()
    return values


@dataclass(frozen=True)
class RunConfig:
    """Validated parameters for one command."""

    command: str
    sigma: Fraction
    tau: Fraction
    eps: Fraction
    eps_list: tuple[Fraction, ...]
    kind: str
    order: int
    methods: tuple[SolveMethod, ...]
    output: Path
    jobs: int
    seed: int
    trials: int
    xdot_max: float
    phase_points: int
    n_points: int | None = None
    length: float | None = None
    density_csv: Path | None = None
    payoff: Path | None = None
    fixture: Path | None = None
    v_csv: Path | None = None
    sources: dict[str, str] = field(default_factory=dict, compare=False)

    @classmethod
    def from_sources(
        cls,
        command: str,
        config_path: str | Path | None = None,
        overrides: dict[str, Any] | None = None,
    ) -> RunConfig:
        """Merge defaults < config file < command-line overrides and validate."""
        merged: dict[str, Any] = dict(DEFAULTS)
        merged[CONF_OUTPUT] = DEFAULT_OUTPUTS[command]
        sources = {key: "default" for key in merged}
        if config_path is not None:
            for key, value in load_config_file(config_path).items():
                merged[key] = value
                sources[key] = "file"
        for key, value in (overrides or {}).items():
            if value is not None:
                merged[key] = value
                sources[key] = "flag"

        try:
            values = PARAMETER_SCHEMA(merged)
            if command in COMMAND_SCHEMAS:
                values = COMMAND_SCHEMAS[command](values)
        except vol.Invalid as exception:
            raise InvalidParameterError(f"invalid configuration: {exception}") from exception

        if values[CONF_KIND] == KIND_TABULATED and CONF_DENSITY_CSV not in values:
            raise InvalidParameterError("kind=tabulated needs density_csv")
        if values[CONF_KIND] in (KIND_GAUSSIAN, KIND_TRIANGULAR) and values[CONF_EPS] == 0:
            raise InvalidParameterError(f"kind={values[CONF_KIND]} needs eps > 0")

        def _path(key: str) -> Path | None:
            return Path(values[key]) if key in values else None

        return cls(
            command=command,
            sigma=values[CONF_SIGMA],
            tau=values[CONF_TAU],
            eps=values[CONF_EPS],
            eps_list=values[CONF_EPS_LIST],
            kind=values[CONF_KIND],
            order=values[CONF_ORDER],
            methods=values[CONF_METHOD],
            output=Path(values[CONF_OUTPUT]),
            jobs=values[CONF_JOBS],
            seed=values[CONF_SEED],
            trials=values[CONF_TRIALS],
            xdot_max=values[CONF_XDOT_MAX],
            phase_points=values[CONF_PHASE_POINTS],
            n_points=values.get(CONF_N_POINTS),
            length=values.get(CONF_LENGTH),
            density_csv=_path(CONF_DENSITY_CSV),
            payoff=_path(CONF_PAYOFF),
            fixture=_path(CONF_FIXTURE),
            v_csv=_path(CONF_V_CSV),
            sources=sources,
        )

    def nonlocality(self) -> NonlocalityFunction:
        """The configured H."""
        if self.kind == KIND_DIRAC:
            return Dirac()
        if self.kind == KIND_GAUSSIAN:
            return Gaussian(self.eps)
        if self.kind == KIND_TRIANGULAR:
            return Triangular(self.eps)
        return Tabulated.from_csv(self.density_csv)

    def grid_size(self, default: int = DEFAULT_N_POINTS) -> int:
        """n, falling back to the command's default."""
        return self.n_points or default

    def display(self) -> str:
        """Return a human-readable string summarizing this run."""
        parts = [
            f"σ={self.sigma}",
            f"τ={self.tau}",
            f"H={self.kind}" + (f"(ε={self.eps})" if self.kind != KIND_DIRAC else ""),
        ]
        if self.n_points or self.length:
            parts.append(f"n={self.n_points or 'auto'} L={self.length or 'auto'}")
        parts.append(f"jobs={self.jobs}")
        overridden = sorted(key for key, source in self.sources.items() if source != "default")
        if overridden:
            parts.append("set: " + ", ".join(overridden))
        return f"**{self.command}** (" + " • ".join(parts) + f") → {self.output}"
