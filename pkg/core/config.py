import os

# Runtime knobs (overridable from the environment or the CLI)
LAB_THREADS = int(os.getenv("NRL_THREADS", "1"))
LAB_OUTPUT_DIR = os.getenv("NRL_OUTPUT_DIR", "results")
LAB_LOG_LEVEL = os.getenv("NRL_LOG_LEVEL", "INFO").upper()
LAB_PARALLEL_BACKEND = os.getenv("NRL_PARALLEL_BACKEND", "threading")

# Numerical thresholds
SUPPORT_THRESHOLD = 1e-14
DEGENERACY_THRESHOLD = 1e-10
RESIDUAL_TOLERANCE = 1e-10
KERNEL_NORMALIZATION_TOLERANCE = 1e-3
ELLIPTICITY_TOLERANCE = 1e-3
BLOWUP_FACTOR = 10.0
GRID_COARSENESS_BOUND = 1.0

# Grid caps; dense storage grows like unknowns^2, so 2D solves get the tighter one
MAX_GRID_NODES = 200_000
MAX_2D_UNKNOWNS = 10_000


def unknowns_cap(dimension: int) -> int:
    """Cap on interior unknowns of a dense solve; 1D grids are bounded by the node cap only"""
    return MAX_2D_UNKNOWNS if dimension >= 2 else MAX_GRID_NODES

# Default acceptance gates, overridable per scenario file
DEFAULT_GATES = {
    "main_estimate_spread": 3.0,
    "hopf_spread": 10.0,
    "stability": 0.5,
    "normal_derivative_margin": 1.1,
    "whitney_overlap": 20,
    "barrier_margin": -1e-8,
    "barrier_variation": 5.0,
    "identity_factor": 3.0,
    "very_weak_factor": 5.0,
    "torsion_relative_error": 0.02,
}
