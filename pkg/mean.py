"""Means on a commutative semigroup S.

A FiniteMean is a finitely supported probability weighting on S; a TimeMean
is the uniform average over [0, t_n]. Exact invariant means exist on finite
semigroups and are found by linear programming.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from config import CHECKS, QUADRATURE
from errors import InfeasibleError, InvalidArgumentError, NumericError
from quadrature import simpson_average
from semigroup import FiniteElem, FiniteSemigroup, Grid2D, Time, translate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FiniteMean:
    support: tuple
    cesaro_order: Optional[int] = field(default=None, compare=False)
    weights: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        support = tuple((index, float(w)) for index, w in self.support)
        object.__setattr__(self, "support", support)
        if not support:
            raise InvalidArgumentError("A mean needs a nonempty support")
        weights = dict(support)
        if len(weights) != len(support):
            raise InvalidArgumentError("Support indices must be pairwise distinct")
        if len({type(index) for index in weights}) != 1:
            raise InvalidArgumentError("Support indices must share one variant")
        if any(not math.isfinite(w) or w < 0 for w in weights.values()):
            raise InvalidArgumentError("Mean weights must be finite and nonnegative")
        total = math.fsum(weights.values())
        if abs(total - 1.0) > CHECKS["weight_sum_tol"]:
            raise InvalidArgumentError(f"Mean weights sum to {total!r}, not 1")
        object.__setattr__(self, "weights", weights)

    def weight(self, index):
        return self.weights.get(index, 0.0)


@dataclass(frozen=True)
class TimeMean:
    t_n: float

    def __post_init__(self):
        if not (math.isfinite(self.t_n) and self.t_n > 0):
            raise InvalidArgumentError(f"TimeMean horizon must be positive, got {self.t_n}")


def point_mass(s):
    return FiniteMean(((s, 1.0),))


def uniform_mean(indices):
    indices = list(indices)
    w = 1.0 / len(indices)
    return FiniteMean(tuple((index, w) for index in indices))


def cesaro2d(n):
    """Uniform weight 1/n^2 on {(i, j) : 1 <= i, j <= n}."""
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"Cesaro order must be a positive integer, got {n}")
    n = int(n)
    w = 1.0 / (n * n)
    support = tuple((Grid2D(i, j), w) for i in range(1, n + 1) for j in range(1, n + 1))
    return FiniteMean(support, cesaro_order=n)


def cesaro_tv_bound(n):
    """2(2n+1)/(n+1)^2, the bound on ||mu_n - mu_{n+1}|| for double Cesaro means."""
    return 2.0 * (2 * n + 1) / (n + 1) ** 2


def time_tv_bound(a, b):
    """2 - 2 min/max, the bound on ||mu_n - mu_{n+1}|| for time means."""
    return 2.0 - 2.0 * min(a, b) / max(a, b)


def _checked(value, index):
    value = float(value)
    if not math.isfinite(value):
        raise NumericError(f"Function value at {index} is not finite")
    return value


def apply_mean(mu, a, quad_tol=None):
    """
    Evaluate mu(a)

    Args:
        mu (FiniteMean | TimeMean): The mean
        a: Function from indices to reals
        quad_tol (float, optional): Relative quadrature tolerance for time means

    Returns:
        float: The weighted sum, or the time average
    """
    if isinstance(mu, FiniteMean):
        return math.fsum(w * _checked(a(index), index) for index, w in mu.support)

    quad_tol = QUADRATURE["quad_tol"] if quad_tol is None else quad_tol

    def integrand(ts):
        return np.array([_checked(a(Time(float(t))), t) for t in ts])

    return float(simpson_average(integrand, mu.t_n, quad_tol, scale=None).value)


def tv_distance(mu, nu):
    """Dual-norm distance between two means of the same variant."""
    if isinstance(mu, FiniteMean) and isinstance(nu, FiniteMean):
        keys = set(mu.weights) | set(nu.weights)
        return math.fsum(abs(mu.weight(k) - nu.weight(k)) for k in keys)
    if isinstance(mu, TimeMean) and isinstance(nu, TimeMean):
        # L1 distance of the uniform densities 1/m on [0, m] and 1/M on [0, M]
        m, M = sorted((mu.t_n, nu.t_n))
        return (1.0 / m - 1.0 / M) * m + (M - m) / M
    raise InvalidArgumentError(f"Cannot compare {type(mu).__name__} with {type(nu).__name__}")


def invariance_deficiency(mu, s, a, quad_tol=None):
    """|mu_t(a(t)) - mu_t(a(s + t))|"""
    return abs(apply_mean(mu, a, quad_tol) - apply_mean(mu, translate(a, s), quad_tol))


def solve_invariant_mean(sg: FiniteSemigroup):
    """
    Find an invariant mean on a finite commutative semigroup

    For every s and every element e the weight of e must equal the weight of
    its preimage under t -> s + t. Together with w >= 0 and sum(w) = 1 this is
    a linear feasibility problem, solved with a zero objective.

    Args:
        sg (FiniteSemigroup): The semigroup

    Returns:
        FiniteMean: Weights on every element of sg (zeros included)
    """
    size = len(sg)
    rows = []
    for s in sg.elements:
        for e in sg.elements:
            row = np.zeros(size)
            row[sg.position[e]] += 1.0
            for t in sg.elements:
                if sg.op(s, t) == e:
                    row[sg.position[t]] -= 1.0
            rows.append(row)
    rows.append(np.ones(size))
    a_eq = np.vstack(rows)
    b_eq = np.zeros(len(rows))
    b_eq[-1] = 1.0

    result = linprog(np.zeros(size), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if result.status != 0:
        raise InfeasibleError(f"No invariant mean found on {sg.name}: {result.message}")

    weights = np.asarray(result.x, dtype=float)
    if weights.min() < 0:
        logger.warning("Clipping negative LP weights down to %.3e on %s", weights.min(), sg.name)
        weights = np.clip(weights, 0.0, None)
    weights = weights / math.fsum(weights)
    return FiniteMean(tuple((FiniteElem(e, sg), float(weights[p])) for p, e in enumerate(sg.elements)))


@dataclass(frozen=True)
class IndicatorBound:
    alpha: float
    mass: float
    holds: bool


def _as_subset(sg, subset):
    subset = frozenset(subset)
    unknown = [e for e in subset if e not in sg.position]
    if unknown:
        raise InvalidArgumentError(f"{unknown!r} are not elements of {sg.name}")
    return subset


def _indicator_mass(mu, sg, subset):
    return math.fsum(mu.weight(FiniteElem(e, sg)) for e in subset)


def indicator_bound_check(sg, mu, sets):
    """
    Compare mu of an intersection with alpha = sum_j mu(A_j) - k + 1

    Args:
        sg (FiniteSemigroup): The semigroup
        mu (FiniteMean): An invariant mean on sg
        sets: Iterable of subsets of sg's element ids

    Returns:
        IndicatorBound: alpha, mu(intersection) and whether mass >= alpha when alpha > 0
    """
    subsets = [_as_subset(sg, A) for A in sets]
    if not subsets:
        raise InvalidArgumentError("Need at least one set")
    alpha = math.fsum(_indicator_mass(mu, sg, A) for A in subsets) - len(subsets) + 1
    intersection = frozenset.intersection(*subsets)
    mass = _indicator_mass(mu, sg, intersection)
    holds = alpha <= 0 or mass >= alpha - 1e-12
    return IndicatorBound(alpha, mass, holds)


def translate_intersection(sg, s0, subset):
    """True iff {s0 + t : t in S} meets ``subset``."""
    subset = _as_subset(sg, subset)
    s0 = s0.id if isinstance(s0, FiniteElem) else s0
    if s0 not in sg.position:
        raise InvalidArgumentError(f"{s0!r} is not an element of {sg.name}")
    return any(sg.op(s0, t) in subset for t in sg.elements)


class CesaroSchedule:
    """n -> cesaro2d(n)."""

    def __call__(self, n):
        return cesaro2d(n)

    def gap(self, n):
        # Equal to tv_distance(cesaro2d(n), cesaro2d(n + 1)); see tests/test_mean.py
        return cesaro_tv_bound(n)

    def __repr__(self):
        return "CesaroSchedule()"


class TimeSchedule:
    """n -> TimeMean(scale * n**exponent)."""

    def __init__(self, scale=1.0, exponent=1.0):
        if not (scale > 0 and exponent > 0):
            raise InvalidArgumentError("TimeSchedule needs positive scale and exponent")
        self.scale = float(scale)
        self.exponent = float(exponent)

    def horizon(self, n):
        return self.scale * n ** self.exponent

    def __call__(self, n):
        return TimeMean(self.horizon(n))

    def gap(self, n):
        return tv_distance(self(n), self(n + 1))

    def __repr__(self):
        return f"TimeSchedule(scale={self.scale}, exponent={self.exponent})"
