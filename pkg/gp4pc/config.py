"""
Configuration settings for the gp4pc solvers and benchmarks.
"""
import logging
import os

from dotenv import load_dotenv

logger = logging.getLogger(__name__)


def load_env_config() -> None:
    """Load environment variables from .env file."""
    if os.path.exists(".env"):
        load_dotenv()
    else:
        logger.debug(".env file not found. Using default or system environment variables.")


def get_optional_env(key: str, default: str) -> str:
    """
    Get an optional environment variable with a default value.

    Args:
        key: The environment variable key
        default: The default value if not set

    Returns:
        str: The environment variable value or default
    """
    return os.getenv(key, default)


def get_int_env(key: str, default: int) -> int:
    """Get an integer environment variable, falling back to default on bad values."""
    raw = get_optional_env(key, str(default))
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer value {raw!r} for {key}; using {default}")
        return default


# Load environment variables
load_env_config()

# Logging Configuration
LOG_LEVEL = get_optional_env("LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# Default worker count for RANSAC iterations and benchmark trials
DEFAULT_THREADS = max(1, get_int_env("GP4PC_THREADS", 1))

# Minimal solver configuration
SOLVER_CONFIG = {
    'backend': 'homotopy',          # 'homotopy' or 'macaulay'
    'residual_tol': 1e-6,           # on the row-normalized system
    'polish_tol': 1e-10,
    'merge_tol': 1e-7,              # relative
    'positivity_slack': 1e-9,
    'realness_tol': 1e-6,
    'coplanarity_tol': 1e-9,
    'parallel_tol': 1e-10,
    'max_homotopy_steps': 2000,
    'initial_step': 0.02,
    'max_step': 0.1,
    'min_step': 1e-10,
}

# RANSAC configuration
RANSAC_CONFIG = {
    'iterations': 1000,
    'inlier_threshold_px': 2.5,
    'seed': 0,
}

# Synthetic scene defaults
SCENE_CONFIG = {
    'num_points': 100,
    'point_cube': (-10.0, 10.0),
    'num_cameras': 10,
    'camera_box': ((-5.0, 5.0), (-5.0, 5.0), (10.0, 20.0)),
    'focal_length': 1000.0,
    'image_size': (1000, 1000),
    'scale_range': (0.5, 2.0),
    'translation_range': (-5.0, 5.0),
}

# Benchmark grids
BENCH_CONFIG = {
    'noise_levels': [0.0, 0.5, 1.0, 1.5, 2.0, 2.5],
    'outlier_levels': [0.25, 0.5, 0.75],
    'stability_trials': 1000,
    'runs_per_level': 100,
    'timing_trials': 200,
    'timing_warmup': 5,
}


def configure_logging(debug: bool = False) -> None:
    """Configure root logging for command-line entry points."""
    level = logging.DEBUG if debug else LOG_LEVEL
    logging.basicConfig(level=level, format=LOG_FORMAT)
    if debug:
        logging.getLogger().setLevel(logging.DEBUG)
