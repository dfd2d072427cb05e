import os

from .errors import ConfigError

SCHEMA_VERSION = 1

# lattice enumeration beyond this many compositions is refused by the exact engine
DEFAULT_LATTICE_CAP = 10 ** 8

# weights whose sum is off by less than NORMALIZATION_REJECT are renormalized,
# anything further away is treated as malformed input
NORMALIZATION_TOLERANCE = 1e-12
NORMALIZATION_REJECT = 1e-6

DISAPPOINTMENT_GUARD = 1e-12
PRESCRIPTION_TIE_TOLERANCE = 1e-12
COST_TIE_RELATIVE_TOLERANCE = 1e-9

KL_RELATIVE_TOLERANCE = 1e-12
KL_MAX_ITERATIONS = 500

RATE_TOLERANCE = 1e-10
RATE_MAX_ITERATIONS = 400

# block sizes must not depend on the thread count
MC_BLOCK_SIZE = 2 ** 16
LATTICE_BLOCK_SIZE = 2 ** 14

IMPORTANCE_MIN_WEIGHT = 1e-3
IMPORTANCE_MAX_RELATIVE_ERROR = 0.1
DEFAULT_N_SAMPLES = 10 ** 5

THREADS_ENV_VAR = "DISAPPOINTMENT_LAB_THREADS"


def thread_count():
    """
    Number of worker threads used for block-parallel reductions

    Return
    int -- the value of DISAPPOINTMENT_LAB_THREADS, or 1 when unset
    """
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None or raw.strip() == "":
        return 1
    if not raw.strip().isdigit() or int(raw) < 1:
        raise ConfigError(
            f"{THREADS_ENV_VAR} must be a positive integer, got <{raw}>", field=THREADS_ENV_VAR
        )
    return int(raw)
