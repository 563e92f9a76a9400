import os
from dotenv import load_dotenv

# Load environment variables from .env file (if it exists)
load_dotenv()


def get_output_dir(override=None):
    """
    Get the directory experiment artifacts are written to

    Args:
        override (str, optional): Value passed on the command line

    Returns:
        str: The output directory
    """
    # Priority order for the output directory:
    # 1. Explicit override (the --out flag)
    # 2. Environment variable ERGOFIX_OUTPUT_DIR (also picked up from .env)
    # 3. OUTPUT["default_dir"]
    if override:
        return override

    if os.environ.get("ERGOFIX_OUTPUT_DIR"):
        return os.environ.get("ERGOFIX_OUTPUT_DIR")

    return OUTPUT["default_dir"]


def get_log_level():
    """Get the logging level name from the environment"""
    return os.environ.get("ERGOFIX_LOG_LEVEL", "INFO").upper()


# App configuration
APP_CONFIG = {
    "app_name": "ErgoFix",
    "version": "1.0.0",
    "description": "Common fixed points of nonexpansive semigroups via ergodic means",
}

# Mann iteration defaults
ITERATION = {
    "alpha": 0.5,
    "alpha_min": 0.01,
    "alpha_max": 0.99,
    "tol": 1e-8,
    "max_iter": 10000,
    "confirm_steps": 1,
    "verdict_window": 5,
    "n_max": 300,
}

# Quadrature of time means
QUADRATURE = {
    "quad_tol": 1e-10,
    "max_halvings": 20,
    "min_halvings": 2,
}

# Tail grids used to approximate limsup over a directed set
TAIL_GRID = {
    "horizon": 10,
    "time_points_per_unit": 10,
}

# Property checkers
CHECKS = {
    "samples": 1000,
    "membership_tol": 1e-9,
    "commutation_tol": 1e-10,
    "commutation_samples": 1000,
    "lp_tol": 1e-9,
    "kernel_threshold": 1e-12,
    "psd_tol": 1e-10,
    "weight_sum_tol": 1e-12,
}

# Retraction onto the common fixed point set
RETRACTION = {
    "inner_tol": 1e-12,
    "max_inner": 10000,
}

# Experiment artifacts
OUTPUT = {
    "default_dir": "runs",
    "trace_file": "trace.csv",
    "summary_file": "summary.json",
    "summaries_file": "summaries.jsonl",
    "float_format": "%.17g",
}
