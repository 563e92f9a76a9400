import pandas as pd
import numpy as np

from iterate import fejer_violation, mann_gap_diagnostic
from mean import (TimeMean, cesaro2d, cesaro_tv_bound, invariance_deficiency, time_tv_bound,
                  tv_distance)
from semigroup import Grid2D, Time


def trace_frame(trace):
    """
    Turn a Mann trace into one row per iteration

    Args:
        trace (Trace): The iteration trace

    Returns:
        pd.DataFrame: Columns n, x_0..x_{d-1}, residual, step_norm, mean_gap
    """
    if not trace.records:
        return pd.DataFrame(columns=["n", "residual", "step_norm", "mean_gap"])

    dimension = trace.records[0].x.size
    rows = []
    for r in trace.records:
        row = {"n": r.n}
        for k in range(dimension):
            row[f"x_{k}"] = float(r.x[k])
        row["residual"] = r.residual
        row["step_norm"] = r.step_norm
        row["mean_gap"] = r.mean_gap
        rows.append(row)
    return pd.DataFrame(rows)


def summarize_trace(trace, window=5):
    """
    Generate run statistics from a Mann trace

    Returns:
        dict: Statistics formatted for the run summary
    """
    stats = {
        "iterations": len(trace.records),
        "converged": bool(trace.converged),
        "final_point": [float(v) for v in trace.final_point],
    }
    if trace.records:
        residuals = trace.residuals
        stats["max_residual_last5"] = float(max(residuals[-window:]))
        stats["min_residual"] = float(min(residuals))
        stats["running_min_final"] = float(mann_gap_diagnostic(trace)[-1])
        stats["fejer_violation"] = fejer_violation(trace)
    else:
        stats["max_residual_last5"] = float("nan")
    return stats


def _first_row_indicator(index):
    return 1.0 if index.i == 1 else 0.0


def tv_identity_frame(n_max, include_time=True, quad_tol=None):
    """
    Check the total-variation identities of the Cesaro and time-mean sequences

    Cesaro: tv(cesaro2d(n), cesaro2d(n+1)) against 2(2n+1)/(n+1)^2.
    Time (t_n = n): tv(TimeMean(n), TimeMean(n+1)) against 2/(n+1).
    Also tracks the translation defect of both sequences, which decays like 1/n.

    Returns:
        pd.DataFrame: One row per n
    """
    rows = []
    previous = cesaro2d(1)
    shift_grid, shift_time = Grid2D(1, 1), Time(1.0)
    for n in range(1, n_max + 1):
        following = cesaro2d(n + 1)
        tv = tv_distance(previous, following)
        bound = cesaro_tv_bound(n)
        row = {
            "n": n,
            "tv_cesaro": tv,
            "bound_cesaro": bound,
            "deviation_cesaro": abs(tv - bound),
            "deficiency_cesaro": invariance_deficiency(previous, shift_grid, _first_row_indicator),
        }
        if include_time:
            tv_time = tv_distance(TimeMean(n), TimeMean(n + 1))
            row["tv_time"] = tv_time
            row["bound_time"] = 2.0 / (n + 1)
            row["deviation_time"] = max(abs(tv_time - 2.0 / (n + 1)), abs(tv_time - time_tv_bound(n, n + 1)))
            row["deficiency_time"] = invariance_deficiency(TimeMean(n), shift_time,
                                                           lambda t: float(np.exp(-t.t)), quad_tol)
        rows.append(row)
        previous = following
    return pd.DataFrame(rows)
