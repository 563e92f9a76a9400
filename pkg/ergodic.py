"""Mean operators T_mu for finitely supported, double Cesaro and time means.

For a finitely supported mean the point T_mu x is the weighted average
sum_t w_t T(t)x; for the time mean it is (1/t_n) * integral_0^t_n T(t)x dt.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from config import QUADRATURE
from errors import InvalidArgumentError
from mean import CesaroSchedule, FiniteMean, TimeMean
from operators import CommutingPair, homogeneous
from quadrature import simpson_average
from semigroup import IndexKind

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ErgodicResult:
    point: np.ndarray
    quad_error_estimate: float = 0.0


def _exact_sum(terms, weights=None):
    """Correctly rounded per-coordinate sum, independent of term order."""
    terms = np.asarray(terms, dtype=float)
    if weights is not None:
        terms = terms * np.asarray(weights, dtype=float)[:, None]
    return np.array([math.fsum(column) for column in terms.T])


def apply_finite_mean(family, mu: FiniteMean, x):
    """sum_{t in support} w_t T(t)x"""
    x = family.check_point(x)
    indices = [index for index, _ in mu.support]
    if any(getattr(index, "kind", None) is not family.index_kind for index in indices):
        raise InvalidArgumentError(f"Mean support does not match the {family.index_kind.value} family")
    terms = [family.act(index, x) for index, _ in mu.support]
    weights = [w for _, w in mu.support]
    return ErgodicResult(_exact_sum(terms, weights))


def _cesaro_terms(pair, n, x):
    """T^i U^j x for j outer, i inner, built from cached powers."""
    terms = []
    y = x
    for _ in range(n):
        y = pair.U(y)
        z = y
        for _ in range(n):
            z = pair.T(z)
            terms.append(z)
    return terms


def _cesaro_average(step, n, x):
    terms = []
    y = x
    for _ in range(n):
        y = step(y)
        terms.append(y)
    return _exact_sum(terms) / n


def apply_cesaro2d(pair: CommutingPair, n, x, factorize=False):
    """
    (1/n^2) sum_{i=1}^n sum_{j=1}^n T^i U^j x

    Args:
        pair (CommutingPair): The commuting maps T and U
        n (int): Cesaro order
        x: Point of C
        factorize (bool): For affine pairs, average the U-orbit first and apply
            the T-average to that single point (O(n) instead of O(n^2) map calls)

    Returns:
        ErgodicResult: The double average
    """
    if not isinstance(pair, CommutingPair):
        raise InvalidArgumentError("Double Cesaro means need a CommutingPair")
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"Cesaro order must be a positive integer, got {n}")
    n = int(n)
    x = pair.check_point(x)

    if factorize and pair.is_affine:
        inner = _cesaro_average(pair.U, n, x)
        return ErgodicResult(_cesaro_average(pair.T, n, inner))

    terms = _cesaro_terms(pair, n, x)
    return ErgodicResult(_exact_sum(terms) / (n * n))


def apply_time_mean(flow, t_n, x, quad_tol=None):
    """
    (1/t_n) integral_0^t_n T(t)x dt by composite Simpson with halving

    Args:
        flow (LinearFlow | RotationFlow): One-parameter family
        t_n (float): Averaging horizon
        x: Point of C
        quad_tol (float, optional): Error target per unit (1 + ||x||)

    Returns:
        ErgodicResult: The average and the quadrature error estimate
    """
    if flow.index_kind is not IndexKind.TIME:
        raise InvalidArgumentError("Time means need a one-parameter flow")
    quad_tol = QUADRATURE["quad_tol"] if quad_tol is None else quad_tol
    x = flow.check_point(x)
    scale = 1.0 + float(np.linalg.norm(x))
    result = simpson_average(lambda ts: flow.trajectory(ts, x), t_n, quad_tol, scale=scale)
    return ErgodicResult(result.value, result.error_estimate)


def apply_mean_operator(family, mean, x, quad_tol=None, factorize=False):
    """T_mu x for any supported mean."""
    if isinstance(mean, TimeMean):
        return apply_time_mean(family, mean.t_n, x, quad_tol)
    if isinstance(mean, FiniteMean):
        if mean.cesaro_order is not None and isinstance(family, CommutingPair):
            return apply_cesaro2d(family, mean.cesaro_order, x, factorize=factorize)
        return apply_finite_mean(family, mean, x)
    raise InvalidArgumentError(f"Unsupported mean {type(mean).__name__}")


def ergodic_residual(family, mean, z, quad_tol=None):
    """||T_mu z - z||"""
    z = family.check_point(z)
    return float(np.linalg.norm(apply_mean_operator(family, mean, z, quad_tol, factorize=True).point - z))


def _affine_cesaro_orbit(pair, x, n_max):
    """T_{mu_n}x for n = 1..n_max via running sums of homogeneous matrix powers."""
    mt, mu = homogeneous(pair.T), homogeneous(pair.U)
    power_t, power_u = np.eye(mt.shape[0]), np.eye(mu.shape[0])
    sum_t, sum_u = np.zeros_like(mt), np.zeros_like(mu)
    lifted = np.append(x, 1.0)
    for n in range(1, n_max + 1):
        power_t = power_t @ mt
        power_u = power_u @ mu
        sum_t += power_t
        sum_u += power_u
        point = (sum_t @ (sum_u @ lifted)) / (n * n)
        yield n, ErgodicResult(point[:-1])


def mean_orbit(family, schedule, x, n_max, quad_tol=None):
    """
    Yield (n, T_{mu_n}x) for n = 1..n_max

    Affine commuting pairs under the Cesaro schedule reuse running matrix
    sums; everything else evaluates each mean from scratch.
    """
    x = family.check_point(x)
    if isinstance(schedule, CesaroSchedule) and isinstance(family, CommutingPair) and family.is_affine:
        yield from _affine_cesaro_orbit(family, x, n_max)
        return
    for n in range(1, n_max + 1):
        yield n, apply_mean_operator(family, schedule(n), x, quad_tol, factorize=True)
