"""Constants for quantum_kolmogorov."""

from logging import Logger, getLogger

LOGGER: Logger = getLogger(__package__)

DOMAIN = "quantum_kolmogorov"

CONF_SIGMA = "sigma"
CONF_TAU = "tau"
CONF_EPS = "eps"
CONF_EPS_LIST = "eps_list"
CONF_KIND = "kind"
CONF_DENSITY_CSV = "density_csv"
CONF_N_POINTS = "n"
CONF_LENGTH = "length"
CONF_ORDER = "order"
CONF_METHOD = "method"
CONF_PAYOFF = "payoff"
CONF_FIXTURE = "fixture"
CONF_V_CSV = "v_csv"
CONF_OUTPUT = "output"
CONF_JOBS = "jobs"
CONF_SEED = "seed"
CONF_TRIALS = "trials"
CONF_XDOT_MAX = "xdot_max"
CONF_PHASE_POINTS = "phase_points"

KIND_DIRAC = "dirac"
KIND_GAUSSIAN = "gaussian"
KIND_TRIANGULAR = "triangular"
KIND_TABULATED = "tabulated"
KIND_MOMENT_ONLY = "moment_only"
KIND_SELF_CONVOLUTION = "self_convolution"
KERNEL_KINDS = (KIND_DIRAC, KIND_GAUSSIAN, KIND_TRIANGULAR, KIND_TABULATED)

METHOD_SPECTRAL = "spectral"
METHOD_KRAMERS_MOYAL = "kramers_moyal"

CONVENTION_BACKWARD = "backward"
CONVENTION_FOKKER_PLANCK = "fokker_planck"

DEFAULT_SIGMA = "1"
DEFAULT_TAU = "1"
DEFAULT_EPS = "0.05"
DEFAULT_N_POINTS = 4096
DEFAULT_MOMENT_ORDER = 10
DEFAULT_JOBS = 1
DEFAULT_SEED = 0
DEFAULT_TRIALS = 4
DEFAULT_EPS_LIST = "0,0.05,0.1,0.2"
DEFAULT_XDOT_MAX = 2.0
DEFAULT_PHASE_POINTS = 101
DEFAULT_METHOD = "spectral"

# grid sizing: L = GRID_WIDTH_FACTOR * max(sigma sqrt(tau), eps) * GRID_SAFETY
GRID_WIDTH_FACTOR = 20.0
GRID_SAFETY = 1.5

DENSITY_NORMALIZATION_TOL = 1e-10
MOMENT_CONSISTENCY_TOL = 1e-6
KERNEL_MASS_TOL = 1e-8
IMAGINARY_RESIDUE_TOL = 1e-10
BOUNDARY_MASS_TOL = 1e-6
ROW_MASS_TOL = 1e-8
ASSOCIATIVITY_TOL = 1e-8
QUADRATURE_AGREEMENT_TOL = 5e-3

# explicit Kramers-Moyal stepping
KM_MAX_ORDER = 8
KM_CFL = 0.4
KM_STENCIL_ACCURACY = 8
KM_GROWTH_LIMIT = 10.0
KM_BOUNDARY_ONE_SIDED = "one_sided"
KM_BOUNDARY_FROZEN = "frozen"

CSV_FLOAT_FORMAT = ".17g"

COMMAND_DERIVE = "derive"
COMMAND_KERNEL = "kernel"
COMMAND_MOMENTS = "moments"
COMMAND_SOLVE = "solve"
COMMAND_ALGEBRA_CHECK = "algebra-check"
COMMAND_GAUGE = "gauge"

DEFAULT_OUTPUTS = {
    COMMAND_DERIVE: "pde.json",
    COMMAND_KERNEL: "kernel.csv",
    COMMAND_MOMENTS: "moments.json",
    COMMAND_SOLVE: "solution.csv",
    COMMAND_ALGEBRA_CHECK: "algebra_report.json",
    COMMAND_GAUGE: "violation.csv",
}

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_INPUT = 2
EXIT_GRID = 3
EXIT_INSTABILITY = 4

# power iteration for operator norms
NORM_ITERATIONS = 300
NORM_REL_TOL = 1e-12
# associativity defects below this are rounding noise
ASSOCIATIVITY_FLOOR = 1e-12
NONCOMMUTATIVITY_FACTOR = 10.0
