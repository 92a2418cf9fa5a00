"""
Exact rational helpers and linear feasibility on top of sympy.

Values are ``fractions.Fraction`` so that boundary tests in the event solver
are decided by exact comparison. Linear systems go through sympy's rational
Gauss-Jordan solve and its exact simplex (``lpmin`` / ``lpmax``).
"""

import logging
from dataclasses import dataclass
from fractions import Fraction

import sympy
from sympy.solvers.simplex import InfeasibleLPError, lpmax, lpmin

logger = logging.getLogger(__name__)

ZERO = Fraction(0)
ONE = Fraction(1)


def as_fraction(value):
    """Convert int, float, str ("0.5", "1/3"), Decimal or Fraction to an exact Fraction.

    Floats are converted to their exact binary value.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, str):
        return Fraction(value.strip())
    return Fraction(value)


def as_fractions(values):
    return tuple(as_fraction(v) for v in values)


def fraction_str(value):
    """'p/q' for non-integers, 'p' otherwise."""
    value = as_fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def exact_pair(value):
    """Serialisable form keeping full fidelity next to a decimal approximation."""
    return {"exact": fraction_str(value), "decimal": float(value)}


def dot(a, b):
    return sum((x * y for x, y in zip(a, b)), ZERO)


@dataclass(frozen=True)
class Inequality:
    """coeffs . x <= bound, or < bound when strict."""
    coeffs: tuple
    bound: Fraction
    strict: bool = False

    def holds(self, point):
        lhs = dot(self.coeffs, point)
        return lhs < self.bound if self.strict else lhs <= self.bound

    def is_trivial(self):
        return all(c == 0 for c in self.coeffs)



@dataclass(frozen=True)
class AffineSet:
    """{ point + basis . t } ; empty basis means a single point."""
    point: tuple
    basis: tuple

    @property
    def dimension(self):
        return len(self.basis)

    def at(self, params):
        out = list(self.point)
        for coef, vec in zip(params, self.basis):
            for i, v in enumerate(vec):
                out[i] += coef * v
        return tuple(out)


@dataclass(frozen=True)
class FeasiblePoint:
    point: tuple
    # dimension of the solution set of the equalities alone
    dimension: int
    # True when the point is the Euclidean projection of the requested target
    on_target: bool


def to_rational(value):
    value = as_fraction(value)
    return sympy.Rational(value.numerator, value.denominator)


def from_rational(value):
    value = sympy.Rational(value)
    return Fraction(int(value.p), int(value.q))


def solve_affine(rows, rhs, nvars):
    """Solution set of rows . x = rhs as an AffineSet, or None when inconsistent."""
    if not rows:
        identity = tuple(tuple(ONE if j == i else ZERO for j in range(nvars)) for i in range(nvars))
        return AffineSet((ZERO,) * nvars, identity)
    matrix = sympy.Matrix([[to_rational(v) for v in row] for row in rows])
    column = sympy.Matrix([to_rational(b) for b in rhs])
    try:
        solution, params = matrix.gauss_jordan_solve(column)
    except ValueError:
        return None
    point = solution.subs({p: 0 for p in params})
    basis = tuple(tuple(from_rational(v) for v in solution.diff(p)) for p in params)
    return AffineSet(tuple(from_rational(v) for v in point), basis)


def _project(affine, goal):
    """Euclidean projection of goal onto the affine set (exact normal equations)."""
    basis = sympy.Matrix([[to_rational(v) for v in vec] for vec in affine.basis]).T
    offset = sympy.Matrix([to_rational(g - p) for g, p in zip(goal, affine.point)])
    params = (basis.T * basis).solve(basis.T * offset)
    return affine.at([from_rational(v) for v in params])


def _relations(equalities, inequalities, symbols, slack=None, margin=0):
    """sympy relations for the non-trivial rows; None if a trivial row is violated.

    Strict rows get ``+ slack`` on the left when a slack symbol is given and are
    tightened by ``margin`` otherwise.
    """
    relations = []
    for coeffs, rhs in equalities:
        rhs = as_fraction(rhs)
        if all(as_fraction(c) == 0 for c in coeffs):
            if rhs != 0:
                return None
            continue
        lhs = sympy.Add(*(to_rational(c) * x for c, x in zip(coeffs, symbols)))
        relations.append(sympy.Eq(lhs, to_rational(rhs)))
    for ineq in inequalities:
        if ineq.is_trivial():
            if not ineq.holds((ZERO,) * len(ineq.coeffs)):
                return None
            continue
        lhs = sympy.Add(*(to_rational(c) * x for c, x in zip(ineq.coeffs, symbols)))
        bound = to_rational(ineq.bound)
        if ineq.strict and slack is not None:
            relations.append(lhs + slack <= bound)
        elif ineq.strict:
            relations.append(lhs <= bound - margin)
        else:
            relations.append(lhs <= bound)
    return relations


def find_point(equalities, inequalities, nvars, target=None):
    """A point satisfying ``equalities`` (pairs of coeffs, rhs) and ``inequalities``.

    When the equalities pin down a single point it is checked and returned.
    Otherwise the Euclidean projection of ``target`` (origin by default) is
    returned if it is feasible, and failing that the point closest to ``target``
    in the max-norm, with strict rows kept strict by half the largest achievable
    slack. None when nothing is feasible.
    """
    equalities = [(as_fractions(c), as_fraction(b)) for c, b in equalities]
    affine = solve_affine([c for c, _ in equalities], [b for _, b in equalities], nvars)
    if affine is None:
        return None
    if affine.dimension == 0:
        if all(c.holds(affine.point) for c in inequalities):
            return FeasiblePoint(affine.point, 0, False)
        return None

    goal = (ZERO,) * nvars if target is None else as_fractions(target)
    projected = _project(affine, goal)
    if all(c.holds(projected) for c in inequalities):
        return FeasiblePoint(projected, affine.dimension, True)

    symbols = sympy.symbols(f"x0:{nvars}")
    margin = 0
    if any(c.strict and not c.is_trivial() for c in inequalities):
        slack = sympy.Dummy("slack")
        relations = _relations(equalities, inequalities, symbols, slack=slack)
        if relations is None:
            return None
        try:
            best, _ = lpmax(slack, relations + [slack <= 1])
        except InfeasibleLPError:
            return None
        if best <= 0:
            return None
        margin = best / 2

    relations = _relations(equalities, inequalities, symbols, margin=margin)
    if relations is None:
        return None
    spread = sympy.Dummy("spread")
    for x, g in zip(symbols, goal):
        relations.append(x - to_rational(g) <= spread)
        relations.append(to_rational(g) - x <= spread)
    try:
        _, values = lpmin(spread, relations)
    except InfeasibleLPError:
        return None
    point = tuple(from_rational(values[x]) for x in symbols)
    if not all(c.holds(point) for c in inequalities) or \
            any(dot(c, point) != b for c, b in equalities):
        logger.error(f"feasibility solve returned a point outside the constraints: {point}")
        return None
    return FeasiblePoint(point, affine.dimension, False)


def box_constraints(nvars, index, lo, hi):
    """lo <= x[index] <= hi as two Inequalities."""
    up = [ZERO] * nvars
    up[index] = ONE
    down = [ZERO] * nvars
    down[index] = -ONE
    return [Inequality(tuple(up), as_fraction(hi)), Inequality(tuple(down), -as_fraction(lo))]
