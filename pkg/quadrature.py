"""Composite Simpson quadrature with interval halving for averages over [0, T].

The integrand is evaluated on whole arrays of nodes at once, so vector valued
integrands (orbits t -> T(t)x) cost one numpy call per halving.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from config import QUADRATURE
from errors import InvalidArgumentError, NumericError

logger = logging.getLogger(__name__)

# Node arrays beyond this size are not worth the memory
MAX_PANELS = 2 ** 24


@dataclass(frozen=True)
class QuadratureResult:
    value: np.ndarray
    error_estimate: float
    evaluations: int
    halvings: int


def _simpson(values, h):
    return h / 3.0 * (values[0] + values[-1] + 4.0 * values[1:-1:2].sum(axis=0) + 2.0 * values[2:-1:2].sum(axis=0))


def simpson_average(func, t_end, tol=None, scale=1.0, initial_panels=None,
                    max_halvings=None, min_halvings=None):
    """
    Average of ``func`` over [0, t_end] by composite Simpson with halving

    Args:
        func: Maps an array of times of shape (m,) to values of shape (m,) or (m, d)
        t_end (float): Length of the averaging window, > 0
        tol (float): Target absolute error of the average, multiplied by ``scale``
        scale (float, optional): Size of the integrand, e.g. 1 + ||x||; when None
            the tolerance is relative to the largest value seen on the first nodes
        initial_panels (int, optional): Starting number of subintervals (made even)
        max_halvings (int, optional): Halvings allowed before giving up
        min_halvings (int, optional): Halvings always performed

    Returns:
        QuadratureResult: Richardson-corrected average and its error estimate
    """
    tol = QUADRATURE["quad_tol"] if tol is None else tol
    max_halvings = QUADRATURE["max_halvings"] if max_halvings is None else max_halvings
    min_halvings = QUADRATURE["min_halvings"] if min_halvings is None else min_halvings
    if not (t_end > 0 and math.isfinite(t_end)):
        raise InvalidArgumentError(f"Averaging horizon must be positive and finite, got {t_end}")
    if tol <= 0:
        raise InvalidArgumentError(f"Quadrature tolerance must be positive, got {tol}")

    # At least two panels per unit time so periodic integrands are not aliased
    panels = initial_panels if initial_panels else 2 * int(math.ceil(t_end))
    panels = max(2, panels + (panels % 2))

    nodes = np.linspace(0.0, t_end, panels + 1)
    values = np.asarray(func(nodes), dtype=float)
    evaluations = panels + 1
    if not np.all(np.isfinite(values)):
        raise NumericError("Integrand returned non-finite values")
    previous = _simpson(values, t_end / panels)

    if scale is None:
        scale = 1.0 + float(np.max(np.abs(values)))
    bound = tol * scale
    error = math.inf
    for halving in range(1, max_halvings + 1):
        if panels > MAX_PANELS:
            break
        h = t_end / panels
        midpoints = np.linspace(0.5 * h, t_end - 0.5 * h, panels)
        new_values = np.asarray(func(midpoints), dtype=float)
        evaluations += panels
        if not np.all(np.isfinite(new_values)):
            raise NumericError("Integrand returned non-finite values")

        merged = np.empty((2 * panels + 1,) + values.shape[1:])
        merged[0::2] = values
        merged[1::2] = new_values
        values = merged
        panels *= 2

        current = _simpson(values, t_end / panels)
        # Per-coordinate error of the average
        error = float(np.max(np.abs(current - previous))) / (15.0 * t_end)
        if halving >= min_halvings and error <= bound:
            corrected = current + (current - previous) / 15.0
            return QuadratureResult(corrected / t_end, error, evaluations, halving)
        previous = current

    logger.warning("Simpson quadrature on [0, %g] stalled at error %.3e", t_end, error)
    raise NumericError(f"Quadrature did not converge after {max_halvings} halvings "
                       f"(error estimate {error:.3e}, target {bound:.3e})")
