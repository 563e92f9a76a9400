"""Compact convex domains and commutative semigroups of nonexpansive maps on them.

Families are immutable after construction. Every family exposes
``act(s, x)`` = T(s)x together with its index kind and domain C.
"""
import logging
import math

import numpy as np

from config import CHECKS
from errors import DomainError, InvalidArgumentError
from semigroup import Grid2D, IndexKind, Time, combine

logger = logging.getLogger(__name__)

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


def _vector(values, name="vector"):
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.size == 0 or not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} must be a nonempty finite vector")
    return arr


class Ball:
    """Closed Euclidean ball."""

    def __init__(self, center, radius):
        self.center = _vector(center, "center")
        self.radius = float(radius)
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise InvalidArgumentError(f"Ball radius must be positive, got {radius}")

    @property
    def dimension(self):
        return self.center.size

    def distance(self, x):
        return max(0.0, float(np.linalg.norm(np.asarray(x, dtype=float) - self.center)) - self.radius)

    def contains(self, x, tol=None):
        tol = CHECKS["membership_tol"] if tol is None else tol
        return self.distance(x) <= tol

    def project(self, x):
        offset = np.asarray(x, dtype=float) - self.center
        norm = np.linalg.norm(offset)
        if norm <= self.radius:
            return self.center + offset
        return self.center + offset * (self.radius / norm)

    def sample(self, rng, count):
        """``count`` points drawn uniformly from the ball."""
        directions = rng.standard_normal((count, self.dimension))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radii = self.radius * rng.random(count) ** (1.0 / self.dimension)
        return self.center + directions * radii[:, None]

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"


class Box:
    """Closed axis-aligned box."""

    def __init__(self, lower, upper):
        self.lower = _vector(lower, "lower")
        self.upper = _vector(upper, "upper")
        if self.lower.shape != self.upper.shape or not np.all(self.lower < self.upper):
            raise InvalidArgumentError("Box needs lower < upper componentwise")

    @property
    def dimension(self):
        return self.lower.size

    @property
    def center(self):
        return 0.5 * (self.lower + self.upper)

    def distance(self, x):
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x - self.project(x)))

    def contains(self, x, tol=None):
        tol = CHECKS["membership_tol"] if tol is None else tol
        return self.distance(x) <= tol

    def project(self, x):
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def sample(self, rng, count):
        return self.lower + rng.random((count, self.dimension)) * (self.upper - self.lower)

    def __repr__(self):
        return f"Box(lower={self.lower.tolist()}, upper={self.upper.tolist()})"


def _rotation_matrix(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


class Rotation:
    """Planar rotation by ``theta`` about ``center``."""

    is_affine = True

    def __init__(self, theta, center=(0.0, 0.0)):
        self.theta = float(theta)
        self.center = _vector(center, "center")
        if self.center.size != 2:
            raise InvalidArgumentError("Rotations act on the plane")
        self.matrix = _rotation_matrix(self.theta)
        self.offset = self.center - self.matrix @ self.center

    def __call__(self, x):
        return self.center + self.matrix @ (np.asarray(x, dtype=float) - self.center)

    def __repr__(self):
        return f"Rotation(theta={self.theta}, center={self.center.tolist()})"


class AffineContraction:
    """x -> Lx + b with operator norm ||L|| <= 1."""

    is_affine = True

    def __init__(self, matrix, offset=None):
        self.matrix = np.atleast_2d(np.array(matrix, dtype=float))
        rows, cols = self.matrix.shape
        if rows != cols:
            raise InvalidArgumentError("AffineContraction needs a square matrix")
        self.offset = np.zeros(rows) if offset is None else _vector(offset, "offset")
        if self.offset.size != rows:
            raise InvalidArgumentError("Offset and matrix sizes differ")
        norm = np.linalg.norm(self.matrix, 2)
        if norm > 1.0 + 1e-12:
            raise InvalidArgumentError(f"Operator norm {norm:.6g} exceeds 1; the map is not nonexpansive")

    def __call__(self, x):
        return self.matrix @ np.asarray(x, dtype=float) + self.offset

    def __repr__(self):
        return f"AffineContraction(matrix={self.matrix.tolist()}, offset={self.offset.tolist()})"


class MetricProjection:
    """Nearest-point map onto a Ball or Box."""

    is_affine = False

    def __init__(self, target):
        self.target = target

    def __call__(self, x):
        return self.target.project(x)

    def __repr__(self):
        return f"MetricProjection({self.target!r})"


def homogeneous(linear_map):
    """(d+1)x(d+1) matrix of an affine map acting on [x; 1]."""
    d = linear_map.matrix.shape[0]
    out = np.eye(d + 1)
    out[:d, :d] = linear_map.matrix
    out[:d, d] = linear_map.offset
    return out


class _Family:
    index_kind = None

    def __init__(self, domain):
        self.domain = domain

    @property
    def dimension(self):
        return self.domain.dimension

    def check_point(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.dimension:
            raise InvalidArgumentError(f"Expected a point of dimension {self.dimension}, got {x.size}")
        if not self.domain.contains(x):
            raise DomainError(f"Point {x.tolist()} lies outside {self.domain!r}")
        return x

    def check_index(self, s):
        if getattr(s, "kind", None) is not self.index_kind:
            raise InvalidArgumentError(f"{type(self).__name__} is indexed by {self.index_kind.value}, got {s!r}")

    def act(self, s, x):
        """T(s)x for x in C."""
        self.check_index(s)
        return self._act(s, self.check_point(x))

    def _validate_domain(self, maps, samples, seed):
        rng = np.random.default_rng(seed)
        points = self.domain.sample(rng, samples)
        for m in maps:
            worst = max(self.domain.distance(m(x)) for x in points)
            if worst > CHECKS["membership_tol"]:
                raise DomainError(f"{m!r} moves points {worst:.3e} outside {self.domain!r}")


class CommutingPair(_Family):
    """T(i, j) = T^i U^j for commuting nonexpansive maps T and U."""

    index_kind = IndexKind.GRID2D

    def __init__(self, T, U, domain, samples=None, seed=0):
        super().__init__(domain)
        self.T = T
        self.U = U
        samples = CHECKS["commutation_samples"] if samples is None else samples
        self._validate_domain([T, U], samples, seed)

        rng = np.random.default_rng(seed + 1)
        points = self.domain.sample(rng, samples)
        defect = max(float(np.linalg.norm(T(U(x)) - U(T(x)))) for x in points)
        if defect > CHECKS["commutation_tol"]:
            raise InvalidArgumentError(f"T and U do not commute (defect {defect:.3e})")
        logger.debug("Built %r with commutation defect %.3e", self, defect)

    @property
    def is_affine(self):
        return self.T.is_affine and self.U.is_affine

    def _act(self, s, x):
        y = x
        for _ in range(s.j):
            y = self.U(y)
        for _ in range(s.i):
            y = self.T(y)
        return y

    def sample_index(self, rng, high=20):
        return Grid2D(int(rng.integers(1, high + 1)), int(rng.integers(1, high + 1)))

    def __repr__(self):
        return f"CommutingPair(T={self.T!r}, U={self.U!r}, domain={self.domain!r})"


class LinearFlow(_Family):
    """T(t) = exp(-tA) for a symmetric positive semidefinite A."""

    index_kind = IndexKind.TIME

    def __init__(self, generator, domain, samples=None, seed=0):
        super().__init__(domain)
        A = np.atleast_2d(np.array(generator, dtype=float))
        self.eigenvalues, self.eigenvectors = symmetric_psd_eigh(A)
        self.generator = A
        if A.shape[0] != domain.dimension:
            raise InvalidArgumentError("Generator and domain dimensions differ")
        samples = CHECKS["commutation_samples"] if samples is None else samples
        self._validate_domain([lambda x: self._act(Time(1.0), x)], samples, seed)

    @property
    def rate(self):
        """||A||, the Lipschitz constant of t -> T(t)x per unit ||x||."""
        return float(self.eigenvalues.max()) if self.eigenvalues.size else 0.0

    def trajectory(self, ts, x):
        """Rows T(t)x for each t in ``ts``."""
        ts = np.asarray(ts, dtype=float)
        coefficients = self.eigenvectors.T @ np.asarray(x, dtype=float)
        decay = np.exp(-np.outer(ts, self.eigenvalues))
        return (decay * coefficients) @ self.eigenvectors.T

    def _act(self, s, x):
        return self.trajectory([s.t], x)[0]

    def sample_index(self, rng, high=20.0):
        return Time(float(rng.random() * high))

    def __repr__(self):
        return f"LinearFlow(A={self.generator.tolist()}, domain={self.domain!r})"


class RotationFlow(_Family):
    """T(t) = rotation by omega*t about ``center``."""

    index_kind = IndexKind.TIME

    def __init__(self, omega, center, domain, samples=None, seed=0):
        super().__init__(domain)
        self.omega = float(omega)
        self.center = _vector(center, "center")
        if self.center.size != 2 or domain.dimension != 2:
            raise InvalidArgumentError("RotationFlow acts on the plane")
        samples = CHECKS["commutation_samples"] if samples is None else samples
        self._validate_domain([lambda x: self._act(Time(1.0), x)], samples, seed)

    @property
    def rate(self):
        return abs(self.omega)

    def trajectory(self, ts, x):
        angles = self.omega * np.asarray(ts, dtype=float)
        offset = np.asarray(x, dtype=float) - self.center
        c, s = np.cos(angles), np.sin(angles)
        return self.center + np.column_stack((c * offset[0] - s * offset[1], s * offset[0] + c * offset[1]))

    def _act(self, s, x):
        return self.trajectory([s.t], x)[0]

    def sample_index(self, rng, high=20.0):
        return Time(float(rng.random() * high))

    def __repr__(self):
        return f"RotationFlow(omega={self.omega}, center={self.center.tolist()}, domain={self.domain!r})"


def symmetric_psd_eigh(A, tol=None):
    """Eigendecomposition of a symmetric PSD matrix; tiny negative eigenvalues are zeroed."""
    tol = CHECKS["psd_tol"] if tol is None else tol
    A = np.atleast_2d(np.array(A, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise InvalidArgumentError("Generator must be square")
    if not np.allclose(A, A.T, atol=tol, rtol=0.0):
        raise InvalidArgumentError("Generator must be symmetric")
    eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (A + A.T))
    if eigenvalues.size and eigenvalues.min() < -tol:
        raise InvalidArgumentError(f"Generator has negative eigenvalue {eigenvalues.min():.3e}")
    return np.clip(eigenvalues, 0.0, None), eigenvectors


def act(family, s, x):
    """T(s)x; raises DomainError for x outside C and InvalidArgumentError for a foreign index."""
    return family.act(s, x)


def check_nonexpansive(family, s, samples=None, seed=0):
    """
    Largest observed ||T(s)x - T(s)y|| - ||x - y|| over sampled pairs in C

    Returns:
        float: max violation; <= rounding level for nonexpansive families
    """
    samples = CHECKS["samples"] if samples is None else samples
    rng = np.random.default_rng(seed)
    xs = family.domain.sample(rng, samples)
    ys = family.domain.sample(rng, samples)
    worst = -math.inf
    for x, y in zip(xs, ys):
        gap = np.linalg.norm(family.act(s, x) - family.act(s, y)) - np.linalg.norm(x - y)
        worst = max(worst, float(gap))
    return worst


def check_semigroup_law(family, s, t, samples=None, seed=0):
    """Largest ||T(s+t)x - T(s)T(t)x|| over sampled x in C."""
    samples = CHECKS["samples"] if samples is None else samples
    rng = np.random.default_rng(seed)
    st = combine(s, t)
    worst = 0.0
    for x in family.domain.sample(rng, samples):
        lhs = family.act(st, x)
        family.check_index(s)
        rhs = family._act(s, family.act(t, x))
        worst = max(worst, float(np.linalg.norm(lhs - rhs)))
    return worst


def check_domain_preservation(family, samples=None, seed=0):
    """Largest distance from C of T(s)x over sampled (s, x)."""
    samples = CHECKS["samples"] if samples is None else samples
    rng = np.random.default_rng(seed)
    worst = 0.0
    for x in family.domain.sample(rng, samples):
        s = family.sample_index(rng)
        worst = max(worst, family.domain.distance(family.act(s, x)))
    return worst


def check_strong_continuity(family, t, h=1e-6, samples=None, seed=0):
    """
    Largest ||T(t+h)x - T(t)x|| - rate*h*||x - anchor|| over sampled x

    The anchor is the origin for linear flows and the center for rotation flows.
    """
    if family.index_kind is not IndexKind.TIME:
        raise InvalidArgumentError("Strong continuity is checked for one-parameter flows")
    samples = CHECKS["samples"] if samples is None else samples
    anchor = getattr(family, "center", np.zeros(family.dimension))
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for x in family.domain.sample(rng, samples):
        moved = np.linalg.norm(family.act(Time(t + h), x) - family.act(Time(t), x))
        bound = family.rate * abs(h) * np.linalg.norm(x - anchor)
        worst = max(worst, float(moved - bound))
    return worst


def _angle(value):
    if isinstance(value, str):
        if value.lower() == "golden":
            return GOLDEN_ANGLE
        raise InvalidArgumentError(f"Unknown angle keyword {value!r}")
    return float(value)


def build_domain(spec, dimension, center=None):
    """Domain from a dict; defaults to the unit ball around ``center`` (or the origin)."""
    spec = dict(spec or {})
    kind = spec.get("type", "ball")
    if kind == "ball":
        default_center = np.zeros(dimension) if center is None else center
        return Ball(spec.get("center", default_center), spec.get("radius", 1.0))
    if kind == "box":
        return Box(spec["lower"], spec["upper"])
    raise InvalidArgumentError(f"Unknown domain type {kind!r}")


def _affine_from_spec(spec):
    return AffineContraction(spec["matrix"], spec.get("offset"))


def build_family(spec):
    """
    Build a built-in family from a plain dict

    Supported ``type`` values: rotation_pair, affine_pair, projection_pair,
    linear_flow and rotation_flow.
    """
    try:
        return _build_family(dict(spec))
    except KeyError as exc:
        raise InvalidArgumentError(f"Family spec is missing {exc.args[0]!r}") from exc


def _build_family(spec):
    kind = spec.get("type")
    if kind == "rotation_pair":
        center = _vector(spec.get("center", [0.0, 0.0]), "center")
        domain = build_domain(spec.get("domain", {"radius": spec.get("radius", 1.0)}), 2, center)
        return CommutingPair(Rotation(_angle(spec["theta"]), center),
                             Rotation(_angle(spec.get("phi", spec["theta"])), center), domain)
    if kind == "affine_pair":
        T = _affine_from_spec(spec["T"])
        U = _affine_from_spec(spec.get("U", spec["T"]))
        domain = build_domain(spec.get("domain"), T.matrix.shape[0])
        return CommutingPair(T, U, domain)
    if kind == "projection_pair":
        T = MetricProjection(Box(spec["T"]["lower"], spec["T"]["upper"]))
        U = MetricProjection(Box(spec["U"]["lower"], spec["U"]["upper"]))
        domain = build_domain(spec.get("domain"), T.target.dimension)
        return CommutingPair(T, U, domain)
    if kind == "linear_flow":
        A = np.atleast_2d(np.array(spec["matrix"], dtype=float))
        domain = build_domain(spec.get("domain", {"radius": spec.get("radius", 1.0)}), A.shape[0])
        return LinearFlow(A, domain)
    if kind == "rotation_flow":
        center = _vector(spec.get("center", [0.0, 0.0]), "center")
        domain = build_domain(spec.get("domain", {"radius": spec.get("radius", 1.0)}), 2, center)
        return RotationFlow(_angle(spec["omega"]), center, domain)
    raise InvalidArgumentError(f"Unknown family type {kind!r}")
