"""V(z) = 1/4 sum (z_i^2 - d_i^2)^2 and the quantities derived from it."""

import itertools

from .errors import BoundaryPointError
from .exact import ZERO, dot
from .hull import hull_at
from .model import coords


def lyapunov(z, spec):
    return sum(((v * v - d * d) ** 2 for v, d in zip(coords(z), spec.d)), ZERO) / 4


def lyapunov_gradient(z, spec):
    return tuple(v * (v * v - d * d) for v, d in zip(coords(z), spec.d))


def decay_bound(z, spec):
    """sum |z_i| |z_i^2 - d_i^2|; only meaningful off the discontinuity set."""
    z = coords(z)
    if any(v == 0 or abs(v) == d for v, d in zip(z, spec.d)):
        raise BoundaryPointError(f"decay bound is stated off the surfaces, got z={[str(v) for v in z]}")
    return sum((abs(g) for g in lyapunov_gradient(z, spec)), ZERO)


def decay_margins(spec):
    """k_1+1-k_2, k_i-k_{i+1}, k_{n-1}: the factors in front of |g_i| in the derivative estimate."""
    k = spec.k
    m = spec.m
    if m == 1:
        return (k[0],)
    margins = [k[0] + 1 - k[1]]
    margins.extend(k[i] - k[i + 1] for i in range(1, m - 1))
    margins.append(k[m - 1])
    return tuple(margins)


def lyapunov_derivative_range(z, spec, snap_tol=0):
    """(min, max) of grad V . v over v in K(f(z)); attained at box vertices."""
    hull = hull_at(z, spec, snap_tol)
    gradient = lyapunov_gradient(z, spec)
    choices = [(lo,) if lo == hi else (lo, hi) for lo, hi in hull.q_box]
    values = [dot(gradient, hull.field.apply(q)) for q in itertools.product(*choices)]
    return min(values), max(values)
