"""
Lyapunov monitoring, the three-agent basin classifier and run summaries.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .exact import ZERO, as_fraction, as_fractions, fraction_str
from .hull import EquilibriumTag
from .lyapunov import (  # noqa: F401  re-exported
    decay_bound,
    decay_margins,
    lyapunov,
    lyapunov_derivative_range,
    lyapunov_gradient,
)
from .model import coords, sgn, surfaces
from .solver import EventKind, SegmentMode

logger = logging.getLogger(__name__)

SLIDING_SPEED = as_fraction("3/2")


@dataclass(frozen=True)
class BasinPrediction:
    start: tuple
    limits: frozenset
    deterministic: bool
    finite_time_bound: object = None


def _flight_speed(z, d):
    """Speed of the first straight flight from an interior start under k = (1, 1)."""
    same_sign = (z[0] > 0) == (z[1] > 0)
    outside = [abs(v) > dv for v, dv in zip(z, d)]
    aligned = outside[0] == outside[1]
    if same_sign:
        return 1 if aligned else 3
    return 3 if aligned else 1


def classify_basin_3agent(z0, d):
    """Predicted limit points of the k = (1, 1) three-agent system from z0."""
    z = as_fractions(coords(z0))
    d = as_fractions(d)
    if len(z) != 2 or len(d) != 2:
        raise ValueError("the basin classifier is defined for three agents only")
    if any(v <= 0 for v in d):
        raise ValueError(f"desired gaps must be positive, got {[str(v) for v in d]}")
    d1, d2 = d

    if z[0] == 0 and z[1] == 0:
        limits = {(a * d1, b * d2) for a in (-1, 0, 1) for b in (-1, 0, 1)}
        return BasinPrediction(z, frozenset(limits), False)
    if z[0] == 0:
        s2 = sgn(z[1])
        limits = {(a * d1, s2 * d2) for a in (-1, 0, 1)}
        return BasinPrediction(z, frozenset(limits), False)
    if z[1] == 0:
        s1 = sgn(z[0])
        limits = {(s1 * d1, b * d2) for b in (-1, 0, 1)}
        return BasinPrediction(z, frozenset(limits), False)

    limit = (sgn(z[0]) * d1, sgn(z[1]) * d2)
    r = [abs(abs(v) - dv) for v, dv in zip(z, d)]
    if min(r) == 0:
        bound = abs(r[0] - r[1]) / SLIDING_SPEED
    else:
        bound = min(r) / _flight_speed(z, d) + abs(r[0] - r[1]) / SLIDING_SPEED
    return BasinPrediction(z, frozenset({limit}), True, bound)


def nearest_equilibrium(z, spec, desired_only=False):
    """Closest point of E (or of the desired set) in max-norm, with the distance."""
    point = []
    for v, d in zip(coords(z), spec.d):
        candidates = (-d, d) if desired_only else surfaces(d)
        point.append(min(candidates, key=lambda c: abs(v - c)))
    distance = max(abs(v - p) for v, p in zip(coords(z), point))
    return tuple(point), distance


@dataclass(frozen=True)
class ChatteringBand:
    coord: int
    settle_time: float
    centre: float
    width: float
    switches: int

    def to_dict(self):
        return {
            "coord": self.coord + 1,
            "settle_time": self.settle_time,
            "centre": self.centre,
            "width": self.width,
            "switches": self.switches,
        }


def chattering_band(sampled, coord=0, tol=None):
    """Width of the band z_coord oscillates in once it has settled near a surface.

    Settling means every later sample stays within tol of the surface closest
    to the last sample. Returns None when the coordinate never settles.
    """
    values = sampled.z[:, coord]
    d = float(sampled.d[coord])
    last = values[-1]
    if tol is None:
        tol = 5 * sampled.h
    target = min((-d, 0.0, d), key=lambda c: abs(last - c))
    outside = np.nonzero(np.abs(values - target) > tol)[0]
    start = 0 if outside.size == 0 else int(outside[-1]) + 1
    if start >= len(values):
        return None
    tail = values[start:]
    switches = int(np.count_nonzero(np.diff(sampled.q[start:, coord])))
    return ChatteringBand(coord, float(sampled.t[start]), float(target),
                          float(tail.max() - tail.min()), switches)


def _desired_gap(z, spec):
    return max(abs(abs(v) - d) for v, d in zip(z, spec.d))


def _equilibrium_gap(z, spec):
    return max(min(abs(v), abs(abs(v) - d)) for v, d in zip(z, spec.d))


def _entry_time(trajectory, spec, tol, gap, levels):
    """First exact time the trajectory is within tol of a target set.

    The set of times inside is closed on every segment, so its first point is
    either a segment start or a time where some coordinate equals one of the
    candidate levels.
    """
    for seg in trajectory.segments:
        candidates = {seg.t_start}
        for i, (z, v) in enumerate(zip(seg.z_start, seg.velocity)):
            if v == 0:
                continue
            for c in levels(spec.d[i]):
                t = seg.t_start + (c - z) / v
                if seg.t_start <= t <= seg.t_end:
                    candidates.add(t)
        for t in sorted(candidates):
            if gap(seg.state_at(t), spec) <= tol:
                return t
    return None


def _desired_levels(tol):
    return lambda d: (d - tol, d + tol, -d + tol, -d - tol)


def _equilibrium_levels(tol):
    return lambda d: (-tol, tol, d - tol, d + tol, -d + tol, -d - tol)


@dataclass
class ConvergenceReport:
    terminal: str
    terminal_state: tuple
    terminal_time: object
    time_to_desired: object
    time_to_equilibrium: object
    sliding_duration: object
    event_count: int
    v_profile: list
    tol: object = ZERO
    branch: int = 0
    initial_x: tuple = None
    final_x: tuple = None
    nearest_point: tuple = None
    equilibrium_distance: object = None

    @property
    def sliding_fraction(self):
        if not self.terminal_time:
            return ZERO
        return self.sliding_duration / self.terminal_time

    @property
    def converged(self):
        return self.terminal in (EquilibriumTag.DESIRED.value, EquilibriumTag.DEGENERATE.value)

    def to_dict(self):
        def opt(v):
            return None if v is None else fraction_str(v)

        def vec(values):
            return None if values is None else [fraction_str(v) for v in values]

        return {
            "terminal": self.terminal,
            "terminal_state": vec(self.terminal_state),
            "terminal_state_decimal": [float(v) for v in self.terminal_state],
            "terminal_time": opt(self.terminal_time),
            "time_to_desired": opt(self.time_to_desired),
            "time_to_equilibrium": opt(self.time_to_equilibrium),
            "sliding_duration": opt(self.sliding_duration),
            "sliding_fraction": float(self.sliding_fraction),
            "event_count": self.event_count,
            "v_profile": [[fraction_str(t), fraction_str(v)] for t, v in self.v_profile],
            "tol": fraction_str(self.tol),
            "branch": self.branch,
            "initial_x": vec(self.initial_x),
            "final_x": vec(self.final_x),
            "nearest_point": vec(self.nearest_point),
            "equilibrium_distance": opt(self.equilibrium_distance),
        }

    @classmethod
    def from_dict(cls, data):
        def opt(v):
            return None if v is None else as_fraction(v)

        def vec(values):
            return None if values is None else as_fractions(values)

        return cls(
            terminal=data["terminal"],
            terminal_state=vec(data["terminal_state"]),
            terminal_time=opt(data["terminal_time"]),
            time_to_desired=opt(data["time_to_desired"]),
            time_to_equilibrium=opt(data["time_to_equilibrium"]),
            sliding_duration=opt(data["sliding_duration"]),
            event_count=int(data["event_count"]),
            v_profile=[(as_fraction(t), as_fraction(v)) for t, v in data["v_profile"]],
            tol=as_fraction(data["tol"]),
            branch=int(data.get("branch", 0)),
            initial_x=vec(data.get("initial_x")),
            final_x=vec(data.get("final_x")),
            nearest_point=vec(data.get("nearest_point")),
            equilibrium_distance=opt(data.get("equilibrium_distance")),
        )


def convergence_report(traj, spec, tol=0):
    tol = as_fraction(tol)
    cls = traj.terminal_class
    terminal = cls.tag.value if cls is not None else EventKind.TIMEOUT.value
    v_profile = [(ZERO, lyapunov(traj.z0, spec))]
    for seg in traj.segments:
        if seg.mode is SegmentMode.REST:
            continue
        v_profile.append((seg.t_end, lyapunov(seg.z_end, spec)))
    positions = traj.positions()
    nearest, distance = nearest_equilibrium(traj.terminal_state.z, spec)
    report = ConvergenceReport(
        terminal=terminal,
        terminal_state=traj.terminal_state.z,
        terminal_time=traj.end_time,
        time_to_desired=_entry_time(traj, spec, tol, _desired_gap, _desired_levels(tol)),
        time_to_equilibrium=_entry_time(traj, spec, tol, _equilibrium_gap, _equilibrium_levels(tol)),
        sliding_duration=traj.sliding_duration,
        event_count=traj.event_count,
        v_profile=v_profile,
        tol=tol,
        branch=traj.branch,
        initial_x=None if positions is None else positions[0],
        final_x=None if positions is None else positions[-1],
        nearest_point=nearest,
        equilibrium_distance=distance,
    )
    if not traj.segments:
        report.time_to_desired = ZERO if _desired_gap(traj.z0, spec) <= tol else None
        report.time_to_equilibrium = ZERO if _equilibrium_gap(traj.z0, spec) <= tol else None
    logger.debug(f"branch {traj.branch}: {terminal}, {traj.event_count} events")
    return report


@dataclass
class SampledReport:
    solver: str
    h: float
    tol: float
    terminal: str
    terminal_state: list
    terminal_time: float
    time_to_desired: float
    time_to_equilibrium: float
    max_v_increase: float
    switches: list
    band: ChatteringBand = None

    @property
    def converged(self):
        return self.terminal != EventKind.TIMEOUT.value

    def to_dict(self):
        return {
            "solver": self.solver,
            "h": self.h,
            "tol": self.tol,
            "terminal": self.terminal,
            "terminal_state": list(self.terminal_state),
            "terminal_time": self.terminal_time,
            "time_to_desired": self.time_to_desired,
            "time_to_equilibrium": self.time_to_equilibrium,
            "max_v_increase": self.max_v_increase,
            "switches": list(self.switches),
            "band": None if self.band is None else self.band.to_dict(),
        }


def sampled_tolerance(sampled, spec):
    """Neighbourhood radius for classifying a time-stepped run: max(5 h S, 2 eps_h)."""
    speed = float(np.max(np.sum(np.abs(spec.field.as_array()), axis=1)))
    tol = 5 * sampled.h * speed
    if sampled.eps_h is not None:
        tol = max(tol, 2 * sampled.eps_h)
    return tol


def _first_inside(sampled, gaps, tol):
    inside = np.nonzero(gaps <= tol)[0]
    return None if inside.size == 0 else float(sampled.t[int(inside[0])])


def sampled_report(sampled, spec, tol=None):
    tol = sampled_tolerance(sampled, spec) if tol is None else float(tol)
    d = np.array([float(v) for v in spec.d])
    absz = np.abs(sampled.z)
    desired_gaps = np.max(np.abs(absz - d), axis=1)
    equilibrium_gaps = np.max(np.minimum(absz, np.abs(absz - d)), axis=1)
    if desired_gaps[-1] <= tol:
        terminal = EquilibriumTag.DESIRED.value
    elif equilibrium_gaps[-1] <= tol:
        terminal = EquilibriumTag.DEGENERATE.value
    else:
        terminal = EventKind.TIMEOUT.value
    increases = np.diff(sampled.V)
    band = chattering_band(sampled, 0, tol)
    return SampledReport(
        solver=sampled.solver,
        h=sampled.h,
        tol=tol,
        terminal=terminal,
        terminal_state=[float(v) for v in sampled.z[-1]],
        terminal_time=float(sampled.t[-1]),
        time_to_desired=_first_inside(sampled, desired_gaps, tol),
        time_to_equilibrium=_first_inside(sampled, equilibrium_gaps, tol),
        max_v_increase=float(increases.max()) if increases.size else 0.0,
        switches=[int(v) for v in sampled.switch_count()],
        band=band,
    )
