import json
import math
import os
from datetime import datetime

import numpy as np

from config import APP_CONFIG, OUTPUT


def to_jsonable(value):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_trace(frame, path):
    """Write a trace frame as CSV with 17 significant digits"""
    frame.to_csv(path, index=False, float_format=OUTPUT["float_format"], lineterminator="\n")


def write_summary(summary, path):
    """Write a run summary as a JSON document"""
    with open(path, "w") as f:
        json.dump(to_jsonable(summary), f, indent=2, sort_keys=True)
        f.write("\n")


def append_summary_line(summary, path):
    """Append a run summary to a newline-delimited JSON file"""
    with open(path, "a") as f:
        f.write(json.dumps(to_jsonable(summary), sort_keys=True) + "\n")


def export_to_markdown(summaries):
    """Generate a markdown report of a batch of run summaries"""

    if len(summaries) == 0:
        return "No runs to report."

    now = datetime.now().strftime("%Y-%m-%d %H:%M:%S")
    markdown = f"""# {APP_CONFIG['app_name']} Run Report
Generated: {now}

| run | mode | status | converged | iterations | max residual (last 5) |
|---|---|---|---|---|---|
"""

    for item in summaries:
        residual = item.get("max_residual_last5")
        residual = "n/a" if residual is None else f"{residual:.3e}"
        markdown += (f"| {item.get('name')} | {item.get('mode')} | {item.get('status')} | "
                     f"{item.get('converged')} | {item.get('iterations')} | {residual} |\n")

    return markdown


def ensure_output_dir(path):
    """Create the output folder if it doesn't exist and check it is writable"""
    os.makedirs(path, exist_ok=True)
    return os.access(path, os.W_OK)
