"""Mann iteration, nonexpansive retraction and fixed point characterization.

Mann iteration:   x_{n+1} = alpha_n T_{mu_n} x_n + (1 - alpha_n) x_n
Retraction:       Qx = lim_k (T_mu/2 + I/2)^k T_mu x
Characterization: z is a common fixed point iff T_{mu_n} z -> z, checked
                  together with lambda = limsup_t ||T(t)z - z||.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from config import ITERATION, QUADRATURE, RETRACTION, TAIL_GRID
from ergodic import apply_mean_operator, mean_orbit
from errors import InvalidArgumentError, IterationLimitError, NumericError
from mean import CesaroSchedule, TimeMean, TimeSchedule, cesaro2d
from semigroup import Grid2D, IndexKind, Time, tail_limsup

logger = logging.getLogger(__name__)


def constant_alpha(value):
    """n -> value"""
    return lambda n: float(value)


def table_alpha(values):
    """n -> values[n-1]; the last entry repeats."""
    values = [float(v) for v in values]
    if not values:
        raise InvalidArgumentError("Alpha table is empty")
    return lambda n: values[min(n, len(values)) - 1]


def default_schedule(family):
    """Cesaro means for grid-indexed families, t_n = n time means for flows."""
    if family.index_kind is IndexKind.GRID2D:
        return CesaroSchedule()
    if family.index_kind is IndexKind.TIME:
        return TimeSchedule()
    raise InvalidArgumentError(f"No default mean schedule for {family.index_kind}")


@dataclass(frozen=True)
class MannConfig:
    alpha_schedule: Callable = field(default_factory=lambda: constant_alpha(ITERATION["alpha"]))
    mean_schedule: Optional[Callable] = None
    tol: float = ITERATION["tol"]
    max_iter: int = ITERATION["max_iter"]
    quad_tol: float = QUADRATURE["quad_tol"]
    confirm_steps: int = ITERATION["confirm_steps"]

    def validate(self):
        if not (self.tol > 0 and self.quad_tol > 0):
            raise InvalidArgumentError("Tolerances must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise InvalidArgumentError(f"max_iter must be a positive integer, got {self.max_iter}")
        if self.confirm_steps < 1:
            raise InvalidArgumentError("confirm_steps must be at least 1")
        lo, hi = ITERATION["alpha_min"], ITERATION["alpha_max"]
        for n in range(1, int(self.max_iter) + 1):
            alpha = self.alpha_schedule(n)
            if not lo <= alpha <= hi:
                raise InvalidArgumentError(f"alpha_{n} = {alpha} lies outside [{lo}, {hi}]")


@dataclass(frozen=True)
class StepRecord:
    n: int
    alpha: float
    x: np.ndarray
    w: np.ndarray
    x_next: np.ndarray
    step_norm: float
    residual: float
    mean_gap: float


@dataclass(frozen=True)
class Trace:
    records: tuple
    converged: bool
    final_point: np.ndarray

    def __len__(self):
        return len(self.records)

    @property
    def residuals(self):
        return [r.residual for r in self.records]


def mann_iterate(family, config=None, x1=None):
    """
    Run the Mann-type iteration with ergodic means

    The run stops once the step norm and the residual stay within ``tol`` for
    ``verdict_window`` consecutive steps (or ``confirm_steps`` if larger). A
    start with T_{mu_1}x = x is not enough on its own, since later means may
    move it.

    Args:
        family: Operator family (CommutingPair, LinearFlow or RotationFlow)
        config (MannConfig, optional): Schedules and tolerances
        x1: Starting point in C

    Returns:
        tuple: (Trace, final point)
    """
    config = MannConfig() if config is None else config
    config.validate()
    schedule = config.mean_schedule or default_schedule(family)
    x = family.check_point(x1)

    records = []
    required = max(int(config.confirm_steps), ITERATION["verdict_window"])
    streak = 0
    converged = False
    for n in range(1, int(config.max_iter) + 1):
        mean = schedule(n)
        try:
            w = apply_mean_operator(family, mean, x, config.quad_tol, factorize=True).point
        except NumericError as exc:
            partial = Trace(tuple(records), False, x)
            raise NumericError(f"Step {n}: {exc}", trace=partial) from exc

        alpha = config.alpha_schedule(n)
        x_next = alpha * w + (1.0 - alpha) * x
        if not np.all(np.isfinite(x_next)):
            raise NumericError(f"Non-finite iterate at step {n}", trace=Trace(tuple(records), False, x))

        gap = schedule.gap(n) if hasattr(schedule, "gap") else float("nan")
        record = StepRecord(n, alpha, x, w, x_next,
                            step_norm=float(np.linalg.norm(x_next - x)),
                            residual=float(np.linalg.norm(w - x)),
                            mean_gap=float(gap))
        records.append(record)
        logger.debug("step %d residual %.3e step %.3e", n, record.residual, record.step_norm)
        x = x_next

        if record.step_norm <= config.tol and record.residual <= config.tol:
            streak += 1
            if streak >= required:
                converged = True
                break
        else:
            streak = 0

    if converged:
        logger.info("Mann iteration converged after %d steps", len(records))
    else:
        logger.info("Mann iteration stopped at max_iter=%d, last residual %.3e",
                    config.max_iter, records[-1].residual)
    return Trace(tuple(records), converged, x), x


def mann_gap_diagnostic(trace):
    """Running minimum of the residuals ||w_k - x_k||, k <= n."""
    if not trace.records:
        raise InvalidArgumentError("Trace is empty")
    running, out = math.inf, []
    for r in trace.records:
        running = min(running, r.residual)
        out.append(running)
    return out


def fejer_violation(trace, z0=None):
    """max over n of ||x_{n+1} - z0|| - ||x_n - z0||; <= 0 for Fejer monotone runs."""
    if not trace.records:
        raise InvalidArgumentError("Trace is empty")
    z0 = trace.final_point if z0 is None else np.asarray(z0, dtype=float)
    return max(float(np.linalg.norm(r.x_next - z0) - np.linalg.norm(r.x - z0)) for r in trace.records)


def mean_for_index(family, mean_index):
    """cesaro2d(n) for grid-indexed families, TimeMean(tau) for flows."""
    if family.index_kind is IndexKind.GRID2D:
        if int(mean_index) != mean_index or mean_index < 1:
            raise InvalidArgumentError(f"Cesaro mean index must be a positive integer, got {mean_index}")
        return cesaro2d(int(mean_index))
    return TimeMean(float(mean_index))


def _averaged_limit(family, mean, x, inner_tol, max_inner, quad_tol):
    z = apply_mean_operator(family, mean, x, quad_tol, factorize=True).point
    for k in range(1, max_inner + 1):
        z_next = 0.5 * apply_mean_operator(family, mean, z, quad_tol, factorize=True).point + 0.5 * z
        step = float(np.linalg.norm(z_next - z))
        z = z_next
        if step <= inner_tol:
            logger.debug("Retraction settled after %d averaged steps", k)
            return z
    raise IterationLimitError(f"Retraction did not settle within {max_inner} steps", last_iterate=z)


def retraction_apply(family, mean_index, x, inner_tol=None, max_inner=None, quad_tol=None):
    """
    Qx = lim_k (T_mu/2 + I/2)^k T_mu x with mu = cesaro2d(n) or TimeMean(tau)

    Args:
        family: Operator family
        mean_index: Integer n for grid-indexed families, horizon tau for flows
        x: Point of C
        inner_tol (float, optional): Stop when successive iterates differ by less
        max_inner (int, optional): Averaged steps allowed
        quad_tol (float, optional): Quadrature tolerance for time means

    Returns:
        np.ndarray: The point Qx
    """
    inner_tol = RETRACTION["inner_tol"] if inner_tol is None else inner_tol
    max_inner = RETRACTION["max_inner"] if max_inner is None else max_inner
    x = family.check_point(x)
    return _averaged_limit(family, mean_for_index(family, mean_index), x, inner_tol, max_inner, quad_tol)


def retraction_sensitivity(family, mean_index, x, inner_tol=None, max_inner=None, quad_tol=None):
    """||Q_N x - Q_{2N} x||, how much Qx moves when the surrogate mean is doubled."""
    q_n = retraction_apply(family, mean_index, x, inner_tol, max_inner, quad_tol)
    q_2n = retraction_apply(family, 2 * mean_index, x, inner_tol, max_inner, quad_tol)
    return float(np.linalg.norm(q_n - q_2n))


def projected_retraction(family, fixed_set, mean, x, quad_tol=None):
    """Q = P o T_mu with P the nearest-point map onto a known fixed point set."""
    return fixed_set.project(apply_mean_operator(family, mean, x, quad_tol, factorize=True).point)


def lambda_estimate(family, z, horizon=None):
    """limsup_t ||T(t)z - z|| over the sampled tail."""
    z = family.check_point(z)
    return tail_limsup(lambda t: float(np.linalg.norm(family.act(t, z) - z)), horizon, family.index_kind)


def _head_indices(kind, horizon):
    if kind is IndexKind.GRID2D:
        h = int(math.ceil(horizon))
        return [Grid2D(i, j) for i in range(1, h + 1) for j in range(1, h + 1)]
    steps = int(math.ceil(TAIL_GRID["time_points_per_unit"] * 2 * horizon))
    return [Time(2 * horizon * k / steps) for k in range(steps + 1)]


@dataclass(frozen=True)
class CharacterizationReport:
    residual_sequence: tuple
    lambda_estimate: float
    orbit_excess: float
    verdict: bool
    subnet_residual: float
    mean_residual: float


def characterize(family, z, schedule=None, n_max=None, tol=None, horizon=None, quad_tol=None):
    """
    Decide whether z is a common fixed point from T_{mu_n} z and lambda

    The verdict requires the last ``verdict_window`` residuals and the lambda
    estimate to be within ``tol``.

    Returns:
        CharacterizationReport
    """
    n_max = ITERATION["n_max"] if n_max is None else int(n_max)
    tol = ITERATION["tol"] if tol is None else tol
    horizon = TAIL_GRID["horizon"] if horizon is None else horizon
    if n_max < 1:
        raise InvalidArgumentError("n_max must be at least 1")
    schedule = schedule or default_schedule(family)
    z = family.check_point(z)

    residuals = tuple(float(np.linalg.norm(result.point - z))
                      for _, result in mean_orbit(family, schedule, z, n_max, quad_tol))
    lam = lambda_estimate(family, z, horizon)
    head = max(float(np.linalg.norm(family.act(s, z) - z)) for s in _head_indices(family.index_kind, horizon))

    window = residuals[-min(ITERATION["verdict_window"], n_max):]
    verdict = all(r <= tol for r in window) and lam <= tol
    tail = residuals[len(residuals) // 2:]
    return CharacterizationReport(residuals, lam, head - lam, verdict, min(tail), residuals[-1])
