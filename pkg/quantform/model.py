"""
Formation model: problem instances, the sign quantizer, both vector fields,
gain conditions, coordinate transforms and bandwidth accounting.

The quantizer output vector q is the unit of discretisation everywhere: the
z-field is M q with M a constant tridiagonal matrix per instance.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from .errors import SpecError
from .exact import ZERO, as_fraction, as_fractions, dot

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FormationSpec:
    """n agents on a line, desired gaps d (length n-1) and gains k (length n-1)."""
    n: int
    d: tuple
    k: tuple

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise SpecError(f"agent count must be an integer >= 2, got {self.n}")
        object.__setattr__(self, 'n', int(self.n))
        try:
            d = as_fractions(self.d)
            k = as_fractions(self.k)
        except (TypeError, ValueError) as e:
            raise SpecError(f"gaps and gains must be numbers: {e}") from e
        if len(d) != self.n - 1 or len(k) != self.n - 1:
            raise SpecError(
                f"need {self.n - 1} gaps and gains for n={self.n}, got {len(d)} and {len(k)}")
        if any(v <= 0 for v in d):
            raise SpecError(f"desired gaps must be strictly positive: {[str(v) for v in d]}")
        if any(v <= 0 for v in k):
            raise SpecError(f"gains must be strictly positive: {[str(v) for v in k]}")
        object.__setattr__(self, 'd', d)
        object.__setattr__(self, 'k', k)

    @property
    def m(self):
        """Number of relative coordinates."""
        return self.n - 1

    @cached_property
    def field(self):
        return TridiagonalField(self.k)


@dataclass(frozen=True)
class XState:
    x: tuple
    t: object = ZERO

    def __post_init__(self):
        object.__setattr__(self, 'x', as_fractions(self.x))
        object.__setattr__(self, 't', as_fraction(self.t))


@dataclass(frozen=True)
class ZState:
    z: tuple
    t: object = ZERO

    def __post_init__(self):
        object.__setattr__(self, 'z', as_fractions(self.z))
        object.__setattr__(self, 't', as_fraction(self.t))


def coords(state):
    """Plain tuple of coordinates from a state object or any sequence."""
    if isinstance(state, (ZState, XState)):
        return getattr(state, 'z' if isinstance(state, ZState) else 'x')
    return tuple(state)


class Location(Enum):
    """Where a coordinate sits relative to {-d, 0, d}."""
    BELOW_NEG = "(-inf,-d)"
    AT_NEG = "{-d}"
    NEG_INNER = "(-d,0)"
    AT_ZERO = "{0}"
    POS_INNER = "(0,d)"
    AT_POS = "{d}"
    ABOVE_POS = "(d,inf)"

    @property
    def is_boundary(self):
        return self in (Location.AT_NEG, Location.AT_ZERO, Location.AT_POS)

    @property
    def output(self):
        """Quantizer output on an interval location; None on boundaries."""
        return _OUTPUT.get(self)

    @property
    def upper(self):
        """Interval location just above a boundary."""
        return _UPPER[self]

    @property
    def lower(self):
        return _LOWER[self]

    def surface(self, d):
        """Boundary value for a boundary location."""
        return {Location.AT_NEG: -d, Location.AT_ZERO: ZERO * d, Location.AT_POS: d}[self]


_OUTPUT = {
    Location.BELOW_NEG: -1,
    Location.NEG_INNER: 1,
    Location.POS_INNER: -1,
    Location.ABOVE_POS: 1,
}
_UPPER = {
    Location.AT_NEG: Location.NEG_INNER,
    Location.AT_ZERO: Location.POS_INNER,
    Location.AT_POS: Location.ABOVE_POS,
}
_LOWER = {
    Location.AT_NEG: Location.BELOW_NEG,
    Location.AT_ZERO: Location.NEG_INNER,
    Location.AT_POS: Location.POS_INNER,
}


def locate(value, d, tol=0):
    """Location of a single coordinate, snapping to a surface within tol."""
    if abs(value + d) <= tol:
        return Location.AT_NEG
    if abs(value) <= tol:
        return Location.AT_ZERO
    if abs(value - d) <= tol:
        return Location.AT_POS
    if value < -d:
        return Location.BELOW_NEG
    if value < 0:
        return Location.NEG_INNER
    if value < d:
        return Location.POS_INNER
    return Location.ABOVE_POS


@dataclass(frozen=True)
class QuantizerCell:
    locations: tuple

    @property
    def active(self):
        """Indices of coordinates sitting on a surface."""
        return tuple(i for i, loc in enumerate(self.locations) if loc.is_boundary)

    @property
    def outputs(self):
        """Fixed outputs (None for active coordinates)."""
        return tuple(loc.output for loc in self.locations)


def quantizer_cell(z, spec, snap_tol=0):
    return QuantizerCell(tuple(locate(v, d, snap_tol) for v, d in zip(coords(z), spec.d)))


def surfaces(d):
    return (-d, ZERO * d, d)


@dataclass(frozen=True)
class TridiagonalField:
    """M with 1 below the diagonal, -(k_i+1) on it and k_{i+1} above it."""
    k: tuple
    rows: tuple = field(init=False, repr=False)

    def __post_init__(self):
        k = as_fractions(self.k)
        object.__setattr__(self, 'k', k)
        m = len(k)
        rows = []
        for i in range(m):
            row = [ZERO] * m
            if i > 0:
                row[i - 1] = as_fraction(1)
            row[i] = -(k[i] + 1)
            if i < m - 1:
                row[i + 1] = k[i + 1]
            rows.append(tuple(row))
        object.__setattr__(self, 'rows', tuple(rows))

    @property
    def size(self):
        return len(self.k)

    def apply(self, q):
        return tuple(dot(row, q) for row in self.rows)

    def as_array(self):
        return np.array([[float(v) for v in row] for row in self.rows])


def sgn(v):
    """+1 for v >= 0, -1 otherwise (sgn(0) = +1)."""
    return 1 if v >= 0 else -1


def quantize(z_i, d_i):
    """sgn(z) * sgn(|z| - d): the one-bit guidance term for one gap."""
    if d_i <= 0:
        raise SpecError(f"desired gap must be positive, got {d_i}")
    return sgn(z_i) * sgn(abs(z_i) - d_i)


def quantize_all(z, spec):
    return tuple(quantize(v, d) for v, d in zip(coords(z), spec.d))


def x_velocity_from_q(q, spec):
    """Agent velocities from quantizer outputs: -k_1 q_1, then q_{i-1} - k_i q_i, and q_{n-1} for the last agent."""
    k = spec.k
    m = spec.m
    out = [-k[0] * q[0]]
    for i in range(1, m):
        out.append(q[i - 1] - k[i] * q[i])
    out.append(as_fraction(q[m - 1]))
    return tuple(out)


def vector_field_x(x, spec):
    x = coords(x)
    if len(x) != spec.n:
        raise SpecError(f"expected {spec.n} positions, got {len(x)}")
    q = tuple(quantize(x[i] - x[i + 1], spec.d[i]) for i in range(spec.m))
    return x_velocity_from_q(q, spec)


def vector_field_z(z, spec):
    z = coords(z)
    if len(z) != spec.m:
        raise SpecError(f"expected {spec.m} relative positions, got {len(z)}")
    return spec.field.apply(quantize_all(z, spec))


def x_to_z(x):
    xs = coords(x)
    t = x.t if isinstance(x, XState) else ZERO
    return ZState(tuple(xs[i] - xs[i + 1] for i in range(len(xs) - 1)), t)


def z_to_x(z, anchor):
    """Positions with agent n placed at anchor."""
    zs = coords(z)
    t = z.t if isinstance(z, ZState) else ZERO
    xs = [as_fraction(anchor)]
    for v in reversed(zs):
        xs.append(xs[-1] + v)
    return XState(tuple(reversed(xs)), t)


def validate_gains_equilibrium(spec):
    """k_1 + 1 > k_2, k_i > k_{i+1} for 2 <= i <= n-2, k_{n-1} > 0."""
    k = spec.k
    m = spec.m
    if m >= 2 and not k[0] + 1 > k[1]:
        return False
    if any(not k[i] > k[i + 1] for i in range(1, m - 1)):
        return False
    return k[m - 1] > 0


def validate_gains_convergence(spec):
    """k_1 >= k_2, k_i >= k_{i+1} + 1 for 2 <= i <= n-2, k_{n-1} >= 1."""
    k = spec.k
    m = spec.m
    if m >= 2 and not k[0] >= k[1]:
        return False
    if any(not k[i] >= k[i + 1] + 1 for i in range(1, m - 1)):
        return False
    return k[m - 1] >= 1


def speed_bound(spec):
    """Per-coordinate bound on |z_i'|: row sums of |M|."""
    return tuple(sum((abs(v) for v in row), ZERO) for row in spec.field.rows)


@dataclass(frozen=True)
class BitBudget:
    per_agent: tuple
    total: int
    stated_total: int

    @property
    def discrepancy(self):
        return self.stated_total - self.total

    def lines(self):
        n = len(self.per_agent)
        out = []
        if n > 2:
            middle = "2" if n == 3 else f"2–{n - 1}"
            out.append(f"agents {middle}: 4 bits, agents 1 and {n}: 2 bits")
        else:
            out.append("agents 1 and 2: 2 bits")
        out.append(f"total from per-agent counts: {self.total} bits")
        out.append(f"stated total 4n-2: {self.stated_total} bits (difference {self.discrepancy})")
        return out

    def to_dict(self):
        return {
            "per_agent": list(self.per_agent),
            "total": self.total,
            "stated_total": self.stated_total,
            "discrepancy": self.discrepancy,
        }


def bit_budget(spec):
    """Two bits per neighbouring constraint: 4 for middle agents, 2 for the ends."""
    n = spec.n
    per_agent = (2,) + (4,) * (n - 2) + (2,)
    budget = BitBudget(per_agent, sum(per_agent), 4 * n - 2)
    if budget.discrepancy:
        logger.debug(f"bit budget: per-agent sum {budget.total} differs from 4n-2 = {budget.stated_total}")
    return budget
