import os
from pathlib import Path

# ---------------------------------------------------------------------------
# Paths
# ---------------------------------------------------------------------------
PACKAGE_DIR = Path(__file__).resolve().parent
PROJECT_DIR = PACKAGE_DIR.parent
RESULTS_DIR = Path(os.environ.get("PWCET_RESULTS_DIR", PROJECT_DIR / "results"))

# ---------------------------------------------------------------------------
# Target exceedance probabilities
# ---------------------------------------------------------------------------
SYNTHETIC_PROBABILITIES = (1e-7, 1e-8, 1e-9, 1e-10, 1e-11, 1e-12, 1e-13, 1e-14, 1e-15)
TRACE_PROBABILITY = 1e-5

# ---------------------------------------------------------------------------
# Parameter grid (k exponent, d scale divisor)
# k: log-spaced over a fixed range; d: log-spaced from median/100 to 100 x max
# ---------------------------------------------------------------------------
K_MIN = 0.25
K_MAX = 256.0
K_COUNT = 64
D_COUNT = 64
D_LOW_DIVISOR = 100.0
D_HIGH_FACTOR = 100.0

# ---------------------------------------------------------------------------
# Safeguard: top-tail share screen (stand-in for restricting-k)
# the ceil(TAIL_FRACTION * n) largest samples may carry at most GAMMA of a
# moment sum; at n = 1e5 that is the top 100
# ---------------------------------------------------------------------------
GAMMA = 0.5
TAIL_FRACTION = 1e-3
SAFEGUARD_LABEL = "top-tail share screen (restricting-k stand-in)"

# ---------------------------------------------------------------------------
# Sample sizes and seeds
# ---------------------------------------------------------------------------
DESK_N = 10**5
FULL_SCALE_N = 10**6
TRACE_ESTIMATION_N = 10**4
HOLDOUT_N = 10**6
DEFAULT_SEEDS = (1, 2, 3)
HOLDOUT_SEED_OFFSET = 1_000_003

# Philox is counter-based; the stream for a seed is fixed across numpy versions
RNG_ALGORITHM = "numpy.random.Philox (Philox4x64-10), Generator API"

# ---------------------------------------------------------------------------
# Numerical tolerances
# ---------------------------------------------------------------------------
SATURATION_RTOL = 1e-15
TIE_RTOL = 1e-12
QUANTILE_RTOL = 1e-13
# absolute tolerance on log(1 - x) for the Beta upper tail
LOG_XTOL = 1e-15
BISECTION_RTOL = 1e-12
MAX_BRACKET_DOUBLINGS = 200

# ---------------------------------------------------------------------------
# Curve dumps
# ---------------------------------------------------------------------------
CURVE_POINTS = 512
CURVE_LOW_FRACTION = 0.5
CURVE_HIGH_FACTOR = 4.0

# ---------------------------------------------------------------------------
# Output formatting
# ---------------------------------------------------------------------------
FLOAT_FORMAT = ".17g"
UNREACHABLE = "UNREACHABLE"
UNKNOWN = "UNKNOWN"
UNDEFINED = "UNDEFINED"

# ---------------------------------------------------------------------------
# Trace units (converted to seconds on load)
# ---------------------------------------------------------------------------
UNIT_FACTORS = {
    "s": 1.0,
    "ms": 1e-3,
    "us": 1e-6,
    "ns": 1e-9,
}
DEFAULT_UNIT = "s"

# ---------------------------------------------------------------------------
# Concurrency and exit codes
# ---------------------------------------------------------------------------
MAX_WORKERS = min(4, os.cpu_count() or 1)

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_COMPUTATION_ERROR = 3
