"""
Krasowskii set-valued field K(f(z)) as the image of a box of quantizer
outputs under M, plus exact equilibrium tests.
"""

import itertools
import logging
from dataclasses import dataclass
from enum import Enum

from .exact import ONE, ZERO, as_fraction, box_constraints, find_point
from .model import TridiagonalField, coords, quantize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KrasowskiiHull:
    field: TridiagonalField
    # (lo, hi) per coordinate; lo == hi off the surfaces
    q_box: tuple

    @property
    def active(self):
        return tuple(i for i, (lo, hi) in enumerate(self.q_box) if lo != hi)

    def centre(self):
        return tuple((lo + hi) / 2 for lo, hi in self.q_box)


class EquilibriumTag(Enum):
    NOT_EQUILIBRIUM = "NotEquilibrium"
    DESIRED = "Desired"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class EquilibriumClass:
    tag: EquilibriumTag
    witness: tuple = None

    @property
    def is_equilibrium(self):
        return self.tag is not EquilibriumTag.NOT_EQUILIBRIUM


def _distance_to_surface(value, d):
    return min(abs(value), abs(abs(value) - d))


def hull_at(z, spec, snap_tol=0):
    """K(f(z)): singleton q for interior coordinates, [-1, 1] for active ones."""
    tol = as_fraction(snap_tol)
    box = []
    for value, d in zip(coords(z), spec.d):
        if _distance_to_surface(value, d) <= tol:
            box.append((-ONE, ONE))
        else:
            q = as_fraction(quantize(value, d))
            box.append((q, q))
    return KrasowskiiHull(spec.field, tuple(box))


def contains_zero(hull):
    """Decide 0 in M.box exactly; returns (found, witness q or None)."""
    m = hull.field.size
    equalities = [(row, ZERO) for row in hull.field.rows]
    inequalities = []
    for i, (lo, hi) in enumerate(hull.q_box):
        inequalities.extend(box_constraints(m, i, lo, hi))
    found = find_point(equalities, inequalities, m, target=hull.centre())
    if found is None:
        return False, None
    if any(v != 0 for v in hull.field.apply(found.point)):
        logger.error(f"witness {found.point} does not annihilate the field")
        return False, None
    return True, found.point


def is_equilibrium_analytic(z, spec, snap_tol=0):
    """Every coordinate within snap_tol of {-d_i, 0, d_i}."""
    tol = as_fraction(snap_tol)
    return all(_distance_to_surface(v, d) <= tol for v, d in zip(coords(z), spec.d))


def classify_equilibrium(z, spec, snap_tol=0):
    if not is_equilibrium_analytic(z, spec, snap_tol):
        return EquilibriumClass(EquilibriumTag.NOT_EQUILIBRIUM)
    tol = as_fraction(snap_tol)
    _, witness = contains_zero(hull_at(z, spec, snap_tol))
    if all(abs(abs(v) - d) <= tol for v, d in zip(coords(z), spec.d)):
        return EquilibriumClass(EquilibriumTag.DESIRED, witness)
    return EquilibriumClass(EquilibriumTag.DEGENERATE, witness)


def hull_vertices(hull):
    """The 2^m images M.q over vertices of the box, lower endpoints first."""
    choices = [(lo,) if lo == hi else (lo, hi) for lo, hi in hull.q_box]
    return [hull.field.apply(q) for q in itertools.product(*choices)]
