# ghzsim/constants.py
import math

# --- Normalization ---
# All times and strengths are in units of the maximum pulse strength.
LAMBDA_MAX = 1.0
PI_PULSE_DURATION = 2 * math.pi  # at LAMBDA_MAX
PI_PULSE_PHASE = -math.pi / 2

# Largest normalized exposure the composite arcsin admits: 2(8 - pi)
MAX_COMPOSITE_T_NORM = 2 * (8 - math.pi)

# --- Run defaults (figure parameters) ---
DEFAULT_TAU = 100 * math.pi
DEFAULT_OMEGA = 1e-5
DEFAULT_TRIALS = 1_000_000
DEFAULT_PHI1 = 0.0
DEFAULT_MASTER_SEED = 42
DEFAULT_N_VALUES = tuple(range(1, 101))
FIGURE_N_VALUES = tuple(range(1, 2001))

# --- Protocol labels ---
PROTOCOL_CONVENTIONAL = "conventional"
PROTOCOL_COMPOSITE = "composite"
PROTOCOL_APPENDIX = "appendix"

PROTOCOL_CHOICES = (
    PROTOCOL_CONVENTIONAL,
    PROTOCOL_COMPOSITE,
    PROTOCOL_APPENDIX,
)

# --- Composite arc variants ---
COMPOSITE_ARC_LONG = "long"
COMPOSITE_ARC_SHORT = "short"

# --- Capacity guards ---
DENSE_STATE_MAX_SPINS = 14
DENSE_ORACLE_MAX_SPINS = 12
LAB_FRAME_MAX_SPINS = 3

# --- Tolerances ---
UNITARY_TOL = 1e-8
NORM_TOL = 1e-12
# Per applied pulse in the lab-frame register
LAB_NORM_TOL = 1e-9
BUDGET_TOL = 1e-9
DENSE_AGREEMENT_TOL = 1e-10
PROBABILITY_SLACK = 1e-12

# --- Lab-frame regime ---
LAB_MIN_COUPLING = 10.0
LAB_OMEGA_M_RATIO = 10.0
LAB_STEP_FACTOR = 0.01
LAB_RWA_CONSTANT = 5.0

# --- Output ---
CSV_HEADER = (
    "protocol",
    "N",
    "tau",
    "omega",
    "M",
    "t_ex",
    "lambda",
    "p_plus_y",
    "est_mean",
    "est_bias",
    "est_std",
    "rsd",
    "heisenberg_ref",
    "delta_sum",
    "seed",
)
