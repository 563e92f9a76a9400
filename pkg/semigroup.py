"""Commutative semigroup index sets, their directed order and tail limits.

Three kinds of index are supported: grid points of N x N (N starting at 1),
nonnegative times, and elements of a finite semigroup given by its
operation table.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Hashable, Union

from config import TAIL_GRID
from errors import InvalidArgumentError

logger = logging.getLogger(__name__)


class IndexKind(Enum):
    GRID2D = "grid2d"
    TIME = "time"
    FINITE = "finite"


@dataclass(frozen=True)
class Grid2D:
    i: int
    j: int

    def __post_init__(self):
        if int(self.i) != self.i or int(self.j) != self.j or self.i < 1 or self.j < 1:
            raise InvalidArgumentError(f"Grid2D components must be integers >= 1, got ({self.i}, {self.j})")

    @property
    def kind(self):
        return IndexKind.GRID2D


@dataclass(frozen=True)
class Time:
    t: float

    def __post_init__(self):
        if not math.isfinite(self.t) or self.t < 0:
            raise InvalidArgumentError(f"Time must be finite and >= 0, got {self.t}")

    @property
    def kind(self):
        return IndexKind.TIME


@dataclass(frozen=True)
class FiniteElem:
    id: Hashable
    semigroup: "FiniteSemigroup" = field(compare=False, repr=False)

    def __post_init__(self):
        if self.id not in self.semigroup.position:
            raise InvalidArgumentError(f"{self.id!r} is not an element of {self.semigroup.name}")

    @property
    def kind(self):
        return IndexKind.FINITE


Index = Union[Grid2D, Time, FiniteElem]


@dataclass(frozen=True)
class FiniteSemigroup:
    """A finite commutative semigroup given by its full operation table.

    ``table[p][q]`` is the id of ``elements[p] + elements[q]``.
    """

    elements: tuple
    table: tuple
    name: str = "finite"
    position: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "table", tuple(tuple(row) for row in self.table))
        object.__setattr__(self, "position", {e: p for p, e in enumerate(self.elements)})
        self.validate()

    def __len__(self):
        return len(self.elements)

    def op(self, a, b):
        """Combine two raw element ids."""
        return self.table[self.position[a]][self.position[b]]

    def element(self, id):
        return FiniteElem(id, self)

    def indices(self):
        return [FiniteElem(e, self) for e in self.elements]

    def validate(self):
        n = len(self.elements)
        if n == 0:
            raise InvalidArgumentError("A semigroup needs at least one element")
        if len(self.position) != n:
            raise InvalidArgumentError(f"{self.name}: element ids must be distinct")
        if len(self.table) != n or any(len(row) != n for row in self.table):
            raise InvalidArgumentError(f"{self.name}: operation table must be {n}x{n}")

        # Closure
        for row in self.table:
            for entry in row:
                if entry not in self.position:
                    raise InvalidArgumentError(f"{self.name}: table entry {entry!r} is not an element")

        # Commutativity
        for a, b in itertools.combinations(self.elements, 2):
            if self.op(a, b) != self.op(b, a):
                raise InvalidArgumentError(f"{self.name}: {a!r}+{b!r} != {b!r}+{a!r}")

        # Associativity, exhaustively
        for a, b, c in itertools.product(self.elements, repeat=3):
            if self.op(self.op(a, b), c) != self.op(a, self.op(b, c)):
                raise InvalidArgumentError(f"{self.name}: ({a!r}+{b!r})+{c!r} != {a!r}+({b!r}+{c!r})")


def from_operation(elements, operation, name="finite"):
    """Build a FiniteSemigroup by tabulating ``operation`` over ``elements``."""
    elements = tuple(elements)
    table = tuple(tuple(operation(a, b) for b in elements) for a in elements)
    return FiniteSemigroup(elements, table, name)


def saturating(size):
    """{1..size} with s+t = min(s+t, size)."""
    return from_operation(range(1, size + 1), lambda a, b: min(a + b, size), name=f"saturating-{size}")


def cyclic(order):
    """The cyclic group Z_order under addition."""
    return from_operation(range(order), lambda a, b: (a + b) % order, name=f"cyclic-{order}")


def max_semilattice(size):
    """{1..size} with s+t = max(s, t); every element is idempotent."""
    return from_operation(range(1, size + 1), max, name=f"max-{size}")


def multiplicative(order):
    """Z_order under multiplication mod order."""
    return from_operation(range(order), lambda a, b: (a * b) % order, name=f"multiplicative-{order}")


def _same_variant(s, t):
    if type(s) is not type(t):
        raise InvalidArgumentError(f"Cannot combine {type(s).__name__} with {type(t).__name__}")
    if isinstance(s, FiniteElem) and s.semigroup is not t.semigroup and s.semigroup != t.semigroup:
        raise InvalidArgumentError("Finite elements belong to different semigroups")


def combine(s, t):
    """Return s + t."""
    _same_variant(s, t)
    if isinstance(s, Grid2D):
        return Grid2D(s.i + t.i, s.j + t.j)
    if isinstance(s, Time):
        return Time(s.t + t.t)
    return FiniteElem(s.semigroup.op(s.id, t.id), s.semigroup)


def leq(s, t):
    """The directed order: s <= t iff s = t or s + u = t for some u in S."""
    _same_variant(s, t)
    if s == t:
        return True
    if isinstance(s, Grid2D):
        return s.i < t.i and s.j < t.j
    if isinstance(s, Time):
        return s.t <= t.t
    sg = s.semigroup
    return any(sg.op(s.id, u) == t.id for u in sg.elements)


def upper_bound(s, t):
    """A common upper bound w with leq(s, w) and leq(t, w)."""
    _same_variant(s, t)
    if isinstance(s, Grid2D):
        return Grid2D(max(s.i, t.i) + 1, max(s.j, t.j) + 1)
    if isinstance(s, Time):
        return Time(max(s.t, t.t))
    # s + t lies above both in a commutative semigroup
    return combine(s, t)


def translate(f, s):
    """The function t -> f(s + t)."""
    return lambda t: f(combine(s, t))


def tail_grid(kind, horizon):
    """Deterministic sample of the cofinal tail beyond ``horizon``.

    Grid2D: every (i, j) with horizon <= i, j <= 2*horizon.
    Time: uniform grid on [horizon, 2*horizon] with spacing 1/time_points_per_unit.
    """
    if horizon <= 0:
        raise InvalidArgumentError(f"horizon must be positive, got {horizon}")
    if kind is IndexKind.GRID2D:
        h = int(math.ceil(horizon))
        return [Grid2D(i, j) for i in range(h, 2 * h + 1) for j in range(h, 2 * h + 1)]
    if kind is IndexKind.TIME:
        per_unit = TAIL_GRID["time_points_per_unit"]
        steps = int(math.ceil(per_unit * horizon))
        return [Time(horizon + k * horizon / steps) for k in range(steps + 1)]
    raise InvalidArgumentError(f"No tail grid for index kind {kind}")


def exact_limsup(f, sg):
    """limsup over a finite directed set: min over s of max over t >= s."""
    elems = sg.indices()
    values = {e.id: float(f(e)) for e in elems}
    return min(max(values[t.id] for t in elems if leq(s, t)) for s in elems)


def tail_limsup(f: Callable[[Index], float], horizon=None, kind=IndexKind.GRID2D):
    """Approximate limsup_{t in S} f(t) by the sup of f over a sampled tail.

    ``kind`` is an IndexKind, or a FiniteSemigroup in which case the limsup is
    computed exactly and ``horizon`` is ignored.
    """
    if isinstance(kind, FiniteSemigroup):
        return exact_limsup(f, kind)
    if horizon is None:
        horizon = TAIL_GRID["horizon"]
    values = [float(f(t)) for t in tail_grid(kind, horizon)]
    return max(values)
