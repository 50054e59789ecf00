import math
import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

BASE_DIR = Path(__file__).resolve().parent.parent

ARTIFACTS_DIR = Path(os.getenv("CAUSAL_POTTS_ARTIFACTS", BASE_DIR / "artifacts"))

# Thread count for grid sweeps
NUM_THREADS = int(os.getenv("CAUSAL_POTTS_THREADS", "1"))

# Exact enumeration budgets
SPIN_BUDGET = int(float(os.getenv("CAUSAL_POTTS_SPIN_BUDGET", "1e8")))
BOND_EDGE_BUDGET = int(os.getenv("CAUSAL_POTTS_BOND_EDGE_BUDGET", "24"))
CIRCUIT_MAX_K = int(os.getenv("CAUSAL_POTTS_CIRCUIT_MAX_K", "12"))

# Vectorised sweeps are processed in chunks of this many configurations
CHUNK_SIZE = int(os.getenv("CAUSAL_POTTS_CHUNK_SIZE", str(1 << 16)))

# Power iteration
POWER_ITER_TOL = 1e-12
POWER_ITER_MAX = 100_000

# Pure-CDT critical cosmological constant
MU_CRITICAL = math.log(2.0)

# Above this coupling the high-temperature upper bound on Z_P is reported, not asserted
HIGH_T_ASSERT_MAX_BETA = 1.0

# Relative tolerance for identity checks (ES identity, oracles)
IDENTITY_RTOL = 1e-9

CHECKPOINT_VERSION = 1
