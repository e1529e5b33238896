"""
Application settings and configuration.
"""
import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Base paths
BASE_DIR = Path(__file__).resolve().parent.parent.parent.parent
DATA_DIR = BASE_DIR / "data"
RESULTS_DIR = Path(os.getenv("RESULTS_DIR", str(DATA_DIR / "results")))

# Logging Configuration
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# Processing Configuration
DEFAULT_JOBS = int(os.getenv("ADDSPLINE_JOBS", str(os.cpu_count() or 1)))

# Seeds are never taken from the environment
DEFAULT_SEED = 20160321

# Spline parametrization
SPLINE_ORDER = 6
F_DERIVATIVE_ORDER = 3
G_DERIVATIVE_ORDER = 2
QUADRATURE_NODES = 6

# Normal-equation solves
NORMAL_RESIDUAL_TOLERANCE = 1e-8
BACKWARD_ERROR_FACTOR = 64.0
REFINEMENT_STEPS = 5

# Total-variation alternation
TV_MAX_ITERATIONS = int(os.getenv("TV_MAX_ITERATIONS", "500"))
TV_REL_TOLERANCE = float(os.getenv("TV_REL_TOLERANCE", "1e-10"))

# Tuning rule lambda = c_lambda * n^(-3/7), mu = c_mu * n^(-2/5)
TUNING_C_LAMBDA = 14.0
TUNING_C_MU = 0.3
LAMBDA_EXPONENT = -3.0 / 7.0
MU_EXPONENT = -2.0 / 5.0

# q=1: mu^2 ~ n^(-2/3)
TV_C_MU = 1.0
TV_MU_EXPONENT = -1.0 / 3.0

# Theoretical squared-error slopes
F_THEORETICAL_SLOPE = -6.0 / 7.0
G_THEORETICAL_SLOPE = -4.0 / 5.0
TV_THEORETICAL_SLOPE = -2.0 / 3.0

# Simulation grids
DESK_N_GRID = (250, 500, 1000, 2000, 4000)
DESK_REPLICATES = 20
FULL_N_GRID = tuple(range(100, 5001, 50))
FULL_REPLICATES = 100
SLOPE_N_MIN = 1000

# Tuning-constant search
TUNE_N = 5000
TUNE_GRID_LAMBDA = tuple(float(c) for c in range(1, 21))
TUNE_GRID_MU = tuple(round(0.1 * k, 1) for k in range(1, 11))

# Study scenarios
STUDY_RHOS = (0.2, 0.8)
STUDY_SNRS = (0.5, 7.0)
