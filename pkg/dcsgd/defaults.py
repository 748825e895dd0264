from dcsgd.types import Path

# wire model
VALUE_BITS = 32
TERNARY_SIGN_BITS = 2
MESSAGE_TAG_SPARSE = 0
MESSAGE_TAG_TERNARY = 1
MESSAGE_TAG_COMPOSITE = 2

# sampling
MAX_EXPLICIT_NODES = 20
MAX_ENUMERATION_NODES = 12
PSD_TOLERANCE = -1e-10
PROBABILITY_SUM_TOLERANCE = 1e-12

# optimizer
DIVERGENCE_THRESHOLD = 1e12
TRACE_COLUMNS = ["k", "f_gap", "dist2", "bits_up"]

# random stream purposes, part of the (seed, k, i, purpose) counter
STREAM_GRADIENT = 0
STREAM_COMPRESSION = 1
STREAM_SAMPLING = 2
STREAM_OUTPUT = 3

# harness
DEFAULT_TRIALS = 10_000
MIN_CERTIFICATION_TRIALS = 10_000
Z_SCORE_THRESHOLD = 4.0
DEFAULT_TARGET_GAP = 1e-6
DEFAULT_N_CHECKPOINTS = 5
DEFAULT_N_GRID = [1, 2, 4, 8]
DEFAULT_OUTPUT_DIR = Path("results")
RESOLVED_CONFIG_FILE = "resolved_config.json"
SUMMARY_FILE = "summary.csv"
METHODS_FILE = "methods.csv"
CERTIFICATION_FILE = "certification.csv"
BOUNDS_FILE = "bounds.csv"
CERTIFICATION_TOLERANCE = 1e-9

# CLI exit codes
EXIT_OK = 0
EXIT_INVALID = 2
EXIT_DIVERGED = 3

# configuration
SCHEDULE_KINDS = ["constant", "inverse_smoothness", "two_phase"]
PROBLEM_KINDS = ["counterexample", "random_quadratic"]
