"""Constants for the eddy viscosity diagnostics toolkit."""

from typing import Final

PACKAGE = "evdiag"

# Snapshot file format
SNAPSHOT_MAGIC: Final = b"EVDG"
SNAPSHOT_VERSION: Final = 1
SNAPSHOT_HEADER_FORMAT: Final = "<4sIIIIIddddI"

FIELD_VELOCITY: Final = 1 << 0
FIELD_NU_TURB: Final = 1 << 1
FIELD_MIXING_LENGTH: Final = 1 << 2
FIELD_KPRIME: Final = 1 << 3
FIELD_FORCING: Final = 1 << 4

# Config keys
CONF_NU = "nu"
CONF_SNAPSHOT = "snapshot"
CONF_CLOSURE_KIND = "closure.kind"
CONF_CLOSURE_MU = "closure.mu"
CONF_CLOSURE_CS = "closure.cs"
CONF_CLOSURE_NU_T = "closure.nu_t"
CONF_GRID_PERIODIC = "grid.periodic"
CONF_BETA = "analysis.beta"
CONF_FLAG_THRESHOLD = "analysis.flag_threshold"
CONF_TAIL_FRACTION = "analysis.tail_fraction"
CONF_GRADIENT_SCHEME = "analysis.gradient_scheme"
CONF_C_E = "analysis.c_e"
CONF_SOLVER_N = "solver.n"
CONF_SOLVER_NU = "solver.nu"
CONF_SOLVER_T_END = "solver.t_end"
CONF_SOLVER_CFL = "solver.cfl"
CONF_SOLVER_DEALIAS = "solver.dealias"
CONF_SOLVER_SNAPSHOT_EVERY = "solver.snapshot_every"
CONF_SOLVER_SEED = "solver.seed"
CONF_FORCING_KIND = "forcing.kind"
CONF_FORCING_AMPLITUDE = "forcing.amplitude"
CONF_FORCING_WAVENUMBER = "forcing.wavenumber"
CONF_INITIAL_KIND = "initial.kind"
CONF_INITIAL_PERTURBATION = "initial.perturbation"

MANIFEST_NAME = "manifest"

# Default values
DEFAULT_FLAG_THRESHOLD = 10.0
DEFAULT_TAIL_FRACTION = 0.5
DEFAULT_BETAS = (0.25, 0.5, 0.75)
DEFAULT_C_E = 1.0
DEFAULT_CFL = 0.5
DEFAULT_SMAGORINSKY_CS = 0.17
DEFAULT_PERTURBATION = 1e-3

# Tolerances
UNIFORM_DT_RTOL = 1e-9
HORIZON_ALIGN_RTOL = 1e-9
SOLENOIDAL_RTOL = 1e-8
ENERGY_RESIDUAL_TOL = 1e-4

# Solver limits
CFL_VISCOUS = 0.25
MIN_SPEED = 1e-8
MIN_GRID_POINTS = 16
MAX_CFL_RETRIES = 8

REPORT_SCHEMA_VERSION = 1
UNAVAILABLE = "unavailable"
