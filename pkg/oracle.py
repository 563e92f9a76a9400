"""Closed-form references for the built-in families.

These never call the ergodic or iterate modules, so they can be used to
check them.
"""
import cmath
import logging
import math

import numpy as np
from scipy.linalg import null_space

from config import CHECKS
from errors import InvalidArgumentError
from operators import (AffineContraction, Box, CommutingPair, LinearFlow, MetricProjection, Rotation,
                       RotationFlow, symmetric_psd_eigh)
from semigroup import FiniteElem

logger = logging.getLogger(__name__)


def _cesaro_factor(angle, n):
    """(1/n) sum_{k=1}^n e^{i k angle} by the geometric-sum formula."""
    step = cmath.exp(1j * angle)
    if abs(step - 1.0) < 1e-15:
        return 1.0 + 0.0j
    return step * (1.0 - step ** n) / (n * (1.0 - step))


def rotation_cesaro_closed_form(theta, phi, n, x, center=(0.0, 0.0)):
    """Double Cesaro average of T^i U^j x for rotations T, U about a common center."""
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"Cesaro order must be a positive integer, got {n}")
    center = np.asarray(center, dtype=float)
    offset = complex(*(np.asarray(x, dtype=float) - center))
    w = _cesaro_factor(theta, int(n)) * _cesaro_factor(phi, int(n)) * offset
    return center + np.array([w.real, w.imag])


def linear_flow_mean_closed_form(A, tau, x):
    """(1/tau) integral_0^tau exp(-tA)x dt through the eigendecomposition of A."""
    if not tau > 0:
        raise InvalidArgumentError(f"tau must be positive, got {tau}")
    eigenvalues, V = symmetric_psd_eigh(A)
    factors = np.ones_like(eigenvalues)
    positive = eigenvalues > 0
    lt = eigenvalues[positive] * tau
    factors[positive] = -np.expm1(-lt) / lt
    return V @ (factors * (V.T @ np.asarray(x, dtype=float)))


def kernel_projection(A, x):
    """Orthogonal projection of x onto the null space of A."""
    eigenvalues, V = symmetric_psd_eigh(A)
    kernel = V[:, eigenvalues <= CHECKS["kernel_threshold"]]
    return kernel @ (kernel.T @ np.asarray(x, dtype=float))


def verify_invariant_mean(sg, mu):
    """max over s in S and indicator functions a of |mu(a) - mu(a(s + .))|"""
    weights = {e: mu.weight(FiniteElem(e, sg)) for e in sg.elements}
    if any(index.id not in sg.position for index, _ in mu.support if isinstance(index, FiniteElem)):
        raise InvalidArgumentError("Mean is not supported on the semigroup")
    worst = 0.0
    for s in sg.elements:
        for e in sg.elements:
            shifted = math.fsum(weights[t] for t in sg.elements if sg.op(s, t) == e)
            worst = max(worst, abs(weights[e] - shifted))
    return worst


class SinglePoint:
    """F = {p}."""

    def __init__(self, point):
        self.point = np.asarray(point, dtype=float)

    def project(self, z):
        return self.point.copy()

    def distance(self, z):
        return float(np.linalg.norm(np.asarray(z, dtype=float) - self.point))

    def sample(self, rng, count):
        return np.tile(self.point, (count, 1))

    def __repr__(self):
        return f"SinglePoint({self.point.tolist()})"


class AffineSubspaceCapDomain:
    """F = (offset + span(basis)) intersected with the domain."""

    def __init__(self, basis, offset, domain):
        self.basis = np.asarray(basis, dtype=float).reshape(len(offset), -1)
        self.offset = np.asarray(offset, dtype=float)
        self.domain = domain

    def project(self, z):
        # Exact when the subspace passes through the domain's center
        relative = np.asarray(z, dtype=float) - self.offset
        on_subspace = self.offset + self.basis @ (self.basis.T @ relative)
        return self.domain.project(on_subspace)

    def distance(self, z):
        return float(np.linalg.norm(np.asarray(z, dtype=float) - self.project(z)))

    def sample(self, rng, count):
        return np.array([self.project(z) for z in self.domain.sample(rng, count)])

    def __repr__(self):
        return f"AffineSubspaceCapDomain(dim={self.basis.shape[1]}, domain={self.domain!r})"


class BoxCapDomain:
    """F = box intersected with the domain (common fixed points of box projections)."""

    def __init__(self, box, domain):
        self.box = box
        self.domain = domain

    def project(self, z):
        return self.domain.project(self.box.project(z))

    def distance(self, z):
        return float(np.linalg.norm(np.asarray(z, dtype=float) - self.project(z)))

    def sample(self, rng, count):
        return np.array([self.project(z) for z in self.box.sample(rng, count)])

    def __repr__(self):
        return f"BoxCapDomain({self.box!r}, domain={self.domain!r})"


def _affine_parts(m):
    if isinstance(m, (Rotation, AffineContraction)):
        return m.matrix, m.offset
    raise InvalidArgumentError(f"{m!r} is not affine")


def fixed_set_for(family):
    """
    Analytic common fixed point set of a built-in family

    Returns:
        SinglePoint | AffineSubspaceCapDomain | BoxCapDomain
    """
    if isinstance(family, LinearFlow):
        eigenvalues, V = symmetric_psd_eigh(family.generator)
        basis = V[:, eigenvalues <= CHECKS["kernel_threshold"]]
        if basis.shape[1] == 0:
            return SinglePoint(np.zeros(family.dimension))
        return AffineSubspaceCapDomain(basis, np.zeros(family.dimension), family.domain)

    if isinstance(family, RotationFlow):
        if family.omega == 0:
            return AffineSubspaceCapDomain(np.eye(2), np.zeros(2), family.domain)
        return SinglePoint(family.center)

    if isinstance(family, CommutingPair):
        if isinstance(family.T, MetricProjection) and isinstance(family.U, MetricProjection):
            lo = np.maximum(family.T.target.lower, family.U.target.lower)
            hi = np.minimum(family.T.target.upper, family.U.target.upper)
            return BoxCapDomain(Box(lo, hi), family.domain)
        # Stack (L - I)x = -b for both maps
        lt, bt = _affine_parts(family.T)
        lu, bu = _affine_parts(family.U)
        identity = np.eye(family.dimension)
        system = np.vstack([lt - identity, lu - identity])
        rhs = -np.concatenate([bt, bu])
        particular = np.linalg.lstsq(system, rhs, rcond=None)[0]
        basis = null_space(system, rcond=CHECKS["kernel_threshold"])
        if basis.shape[1] == 0:
            return SinglePoint(particular)
        return AffineSubspaceCapDomain(basis, particular, family.domain)

    raise InvalidArgumentError(f"No analytic fixed set for {family!r}")


def validate_fixed_set(fixed_set, family, samples=50, seed=0):
    """Largest ||T(s)p - p|| over sampled p in the fixed set and sampled s."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for p in fixed_set.sample(rng, samples):
        s = family.sample_index(rng)
        worst = max(worst, float(np.linalg.norm(family.act(s, p) - p)))
    return worst
