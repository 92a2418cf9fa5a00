"""
Exact event-driven integrator for z' in K(M q(z)).

Inside a cell the field is constant, so trajectories are straight segments
and hit times are solved exactly. At a boundary point every active
coordinate either slides (stays on its surface with q_i in [-1, 1]) or
leaves to one side; the combinations consistent with the field are found
by exact linear feasibility and picked according to the branch policy.
"""

import itertools
import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import EventOverflow, GeometryError, InfeasibleMode, LyapunovViolation
from .exact import ZERO, Inequality, as_fraction, as_fractions, box_constraints, dot, find_point
from .hull import classify_equilibrium
from .lyapunov import decay_bound, lyapunov, lyapunov_gradient
from .model import (
    Location,
    ZState,
    coords,
    quantize,
    quantizer_cell,
    surfaces,
    validate_gains_convergence,
    x_velocity_from_q,
    z_to_x,
)

logger = logging.getLogger(__name__)

DEFAULT_MAX_BRANCHES = 64


class BranchPolicy(Enum):
    DETERMINISTIC = "deterministic"
    ENUMERATE = "enumerate"


class SegmentMode(Enum):
    REGULAR = "regular"
    SLIDING = "sliding"
    REST = "rest"


class EventKind(Enum):
    BOUNDARY_HIT = "BoundaryHit"
    MODE_CHANGE = "ModeChange"
    EQUILIBRIUM_REACHED = "EquilibriumReached"
    BRANCH_POINT = "BranchPoint"
    TIMEOUT = "Timeout"


class Action(Enum):
    SLIDE = "slide"
    UP = "up"
    DOWN = "down"


class SurfaceKind(Enum):
    ATTRACTING = "attracting"
    REPULSIVE = "repulsive"
    CROSSING = "crossing"
    MIXED = "mixed"


class Decision(Enum):
    CROSS = "cross"
    SLIDE = "slide"
    REST = "rest"
    BRANCH = "branch"


@dataclass(frozen=True)
class TrajectorySegment:
    t_start: object
    t_end: object
    z_start: tuple
    velocity: tuple
    q: tuple
    mode: SegmentMode
    # sliding coordinates for SLIDING segments, every coordinate at REST
    active: tuple = ()
    equilibrium: object = None
    x_start: tuple = None

    @property
    def duration(self):
        return self.t_end - self.t_start

    @property
    def z_end(self):
        return self.state_at(self.t_end)

    def state_at(self, t):
        dt = t - self.t_start
        return tuple(z + dt * v for z, v in zip(self.z_start, self.velocity))

    def x_velocity(self, spec):
        return x_velocity_from_q(self.q, spec)


@dataclass(frozen=True)
class Event:
    t: object
    kind: EventKind
    coords: tuple = ()
    branch: int = 0
    detail: str = ""


@dataclass
class Trajectory:
    spec: object
    z0: tuple
    segments: list = field(default_factory=list)
    events: list = field(default_factory=list)
    terminal: EventKind = None
    branch: int = 0
    parent: int = None
    anchor: object = None

    @property
    def end_time(self):
        return self.segments[-1].t_end if self.segments else ZERO

    @property
    def terminal_state(self):
        if not self.segments:
            return ZState(self.z0, ZERO)
        return ZState(self.segments[-1].z_end, self.end_time)

    @property
    def terminal_class(self):
        """EquilibriumClass of the resting point, None when the run timed out."""
        if self.terminal is not EventKind.EQUILIBRIUM_REACHED:
            return None
        return self.segments[-1].equilibrium

    @property
    def event_count(self):
        return len(self.events)

    @property
    def sliding_duration(self):
        return sum((s.duration for s in self.segments if s.mode is SegmentMode.SLIDING), ZERO)

    def segment_at(self, t):
        t = as_fraction(t)
        for seg in self.segments:
            if seg.t_start <= t <= seg.t_end:
                return seg
        return self.segments[-1] if self.segments else None

    def state_at(self, t):
        """Exact z(t); the terminal state is held after the last segment."""
        t = as_fraction(t)
        seg = self.segment_at(t)
        if seg is None:
            return self.z0
        if t > seg.t_end:
            return seg.z_end
        return seg.state_at(t)

    def sample(self, times):
        """z at each time as a float array of shape (len(times), n-1)."""
        return np.array([[float(v) for v in self.state_at(t)] for t in times], dtype=float)

    def replay(self):
        """Terminal state rebuilt by summing velocity * duration over segments."""
        z = list(self.z0)
        for seg in self.segments:
            for i, v in enumerate(seg.velocity):
                z[i] += v * seg.duration
        return tuple(z)

    def positions(self):
        """Exact agent positions at every segment endpoint, or None without an anchor."""
        if self.anchor is None:
            return None
        points = [z_to_x(self.z0, self.anchor).x]
        for seg in self.segments:
            last = seg.x_start[-1] + seg.x_velocity(self.spec)[-1] * seg.duration
            points.append(z_to_x(seg.z_end, last).x)
        return points

    def position_at(self, t):
        if self.anchor is None:
            return None
        t = as_fraction(t)
        seg = self.segment_at(t)
        if seg is None:
            return z_to_x(self.z0, self.anchor).x
        t = min(t, seg.t_end)
        last = seg.x_start[-1] + seg.x_velocity(self.spec)[-1] * (t - seg.t_start)
        return z_to_x(seg.state_at(t), last).x


@dataclass(frozen=True)
class Continuation:
    actions: tuple
    q: tuple
    velocity: tuple
    mode: SegmentMode
    sliding: tuple = ()
    equilibrium: object = None

    def describe(self, active):
        return ",".join(f"{i + 1}:{a.value}" for i, a in zip(active, self.actions))


@dataclass(frozen=True)
class Resolution:
    decision: Decision
    active: tuple
    continuations: tuple

    @property
    def chosen(self):
        return self.continuations[0]


def time_to_boundary(z, velocity, spec):
    """Earliest time some moving coordinate reaches a surface strictly ahead of it.

    Returns (t, coords); t is math.inf and coords empty when nothing is ahead.
    """
    best = math.inf
    hits = []
    for i, (value, v) in enumerate(zip(coords(z), velocity)):
        if v == 0:
            continue
        ahead = [(b - value) / v for b in surfaces(spec.d[i])]
        ahead = [t for t in ahead if t > 0]
        if not ahead:
            continue
        t = min(ahead)
        if t < best:
            best, hits = t, [i]
        elif t == best:
            hits.append(i)
    return best, tuple(hits)


def _literal_action(location):
    return Action.DOWN if location is Location.AT_NEG else Action.UP


def _side_output(location, action):
    side = location.upper if action is Action.UP else location.lower
    return side.output


def surface_kind(z, i, spec):
    """Sign pattern of the normal component (M q)_i on both sides of the surface through z_i.

    Neighbouring coordinates on a surface contribute their full [-1, 1] range.
    """
    z = coords(z)
    cell = quantizer_cell(z, spec)
    location = cell.locations[i]
    if not location.is_boundary:
        raise GeometryError(f"coordinate {i + 1} is not on a surface: z={[str(v) for v in z]}")
    row = spec.field.rows[i]

    def component_range(q_i):
        lo = hi = row[i] * q_i
        for j in (i - 1, i + 1):
            if 0 <= j < len(z) and row[j] != 0:
                out = cell.locations[j].output
                if out is None:
                    lo -= abs(row[j])
                    hi += abs(row[j])
                else:
                    lo += row[j] * out
                    hi += row[j] * out
        return lo, hi

    up_lo, up_hi = component_range(location.upper.output)
    down_lo, down_hi = component_range(location.lower.output)
    if up_hi < 0 and down_lo > 0:
        return SurfaceKind.ATTRACTING
    if up_lo > 0 and down_hi < 0:
        return SurfaceKind.REPULSIVE
    if (up_lo > 0 and down_lo > 0) or (up_hi < 0 and down_hi < 0):
        return SurfaceKind.CROSSING
    return SurfaceKind.MIXED


def _solve_combination(spec, z, cell, active, actions):
    """q and velocity for one action per active coordinate, or None when inconsistent."""
    m = spec.m
    fixed = list(cell.outputs)
    sliding = []
    for i, action in zip(active, actions):
        if action is Action.SLIDE:
            sliding.append(i)
        else:
            fixed[i] = _side_output(cell.locations[i], action)
    rows = spec.field.rows

    def split(i):
        coeffs = tuple(rows[i][s] for s in sliding)
        constant = sum((rows[i][j] * fixed[j] for j in range(m) if j not in sliding), ZERO)
        return coeffs, constant

    equalities = []
    for i in sliding:
        coeffs, constant = split(i)
        equalities.append((coeffs, -constant))
    inequalities = []
    for idx in range(len(sliding)):
        inequalities.extend(box_constraints(len(sliding), idx, -1, 1))
    for i, action in zip(active, actions):
        if action is Action.SLIDE:
            continue
        coeffs, constant = split(i)
        if action is Action.UP:
            inequalities.append(Inequality(tuple(-c for c in coeffs), constant, strict=True))
        else:
            inequalities.append(Inequality(coeffs, -constant, strict=True))

    target = [as_fraction(quantize(z[s], spec.d[s])) for s in sliding]
    found = find_point(equalities, inequalities, len(sliding), target=target)
    if found is None:
        return None
    if found.dimension and not found.on_target:
        logger.warning(f"sliding selection on {[s + 1 for s in sliding]} is not the minimum-deviation point")
    q = list(fixed)
    for s, value in zip(sliding, found.point):
        q[s] = value
    q = as_fractions(q)
    velocity = spec.field.apply(q)
    if all(v == 0 for v in velocity):
        return Continuation(tuple(actions), q, velocity, SegmentMode.REST, tuple(range(m)),
                            classify_equilibrium(z, spec))
    mode = SegmentMode.SLIDING if sliding else SegmentMode.REGULAR
    return Continuation(tuple(actions), q, velocity, mode, tuple(sliding))


def resolve_boundary(z, active, spec, policy=BranchPolicy.DETERMINISTIC):
    """Consistent continuations at a boundary point, best first.

    Combinations are ranked by how many coordinates follow the literal
    quantizer side (more first), then by how many leave against it (fewer
    first). Deterministic keeps only the first consistent one.
    """
    z = coords(z)
    active = tuple(sorted(active))
    if not active:
        raise GeometryError("resolve_boundary needs at least one active coordinate")
    cell = quantizer_cell(z, spec)
    on_surface = set(cell.active)
    if set(active) != on_surface:
        raise GeometryError(
            f"active set {[i + 1 for i in active]} does not match the surfaces z lies on "
            f"{[i + 1 for i in sorted(on_surface)]}")

    literal = [_literal_action(cell.locations[i]) for i in active]

    def rank(actions):
        literal_count = sum(1 for a, lit in zip(actions, literal) if a is lit)
        counter = sum(1 for a, lit in zip(actions, literal) if a is not lit and a is not Action.SLIDE)
        return -literal_count, counter

    options = []
    for lit in literal:
        counter = Action.UP if lit is Action.DOWN else Action.DOWN
        options.append((lit, Action.SLIDE, counter))
    combos = sorted(itertools.product(*options), key=rank)

    consistent = []
    for actions in combos:
        found = _solve_combination(spec, z, cell, active, actions)
        if found is None:
            continue
        consistent.append(found)
        if policy is BranchPolicy.DETERMINISTIC:
            break
    if not consistent:
        raise InfeasibleMode(f"no consistent continuation at z={[str(v) for v in z]}")

    if len(consistent) > 1:
        decision = Decision.BRANCH
    elif consistent[0].mode is SegmentMode.REST:
        decision = Decision.REST
    elif consistent[0].mode is SegmentMode.SLIDING:
        decision = Decision.SLIDE
    else:
        decision = Decision.CROSS
    return Resolution(decision, active, tuple(consistent))


def sliding_velocity(z, active, spec):
    """Velocity and q on the sliding set: (M q)_i = 0 on it, other q from their cells."""
    z = coords(z)
    active = tuple(sorted(active))
    cell = quantizer_cell(z, spec)
    stray = [i + 1 for i in cell.active if i not in active]
    if stray or any(not cell.locations[i].is_boundary for i in active):
        raise GeometryError(f"z={[str(v) for v in z]} is not exactly on the sliding set {[i + 1 for i in active]}")
    found = _solve_combination(spec, z, cell, active, (Action.SLIDE,) * len(active))
    if found is None:
        raise InfeasibleMode(f"no sliding solution on {[i + 1 for i in active]} at z={[str(v) for v in z]}")
    return found.velocity, found.q


def default_event_cap(spec, z0):
    return math.ceil(10 * spec.n * (1 + lyapunov(z0, spec)))


def default_snap_tol(spec, exact):
    return ZERO if exact else as_fraction(1e-12) * max(spec.d)


def _snap(z, spec, tol):
    if tol <= 0:
        return z
    out = []
    for value, d in zip(z, spec.d):
        for b in surfaces(d):
            if abs(value - b) <= tol:
                value = b
                break
        out.append(value)
    return tuple(out)


def _check_segment(seg, spec):
    dt = seg.duration
    if dt == 0:
        return
    start = seg.z_start
    mid = seg.state_at(seg.t_start + dt / 2)
    end = seg.z_end
    v_start, v_mid, v_end = (lyapunov(p, spec) for p in (start, mid, end))
    if v_mid > v_start or v_end > v_mid:
        raise LyapunovViolation(
            f"V increased on [{seg.t_start}, {seg.t_end}]: {v_start} -> {v_mid} -> {v_end}")
    if seg.mode is not SegmentMode.REGULAR:
        return
    points = [mid]
    if not quantizer_cell(start, spec).active:
        points.append(start)
    for p in points:
        rate = dot(lyapunov_gradient(p, spec), seg.velocity)
        if rate > -decay_bound(p, spec):
            raise LyapunovViolation(f"dV/dt = {rate} above the decay bound at z={[str(v) for v in p]}")


@dataclass
class _Run:
    trajectory: Trajectory
    z: tuple
    t: object
    x_last: object
    pending: Continuation = None


def _advance(run, spec, t_max, policy, cap, check, spawn):
    """Integrate one branch to Rest or t_max; spawn(run, continuation) forks alternatives."""
    traj = run.trajectory
    previous_mode = traj.segments[-1].mode if traj.segments else None
    while True:
        if len(traj.events) > cap:
            raise EventOverflow(f"more than {cap} events (branch {traj.branch}, t={run.t})")
        z, t = run.z, run.t
        if run.pending is not None:
            cont, run.pending = run.pending, None
        else:
            cell = quantizer_cell(z, spec)
            if not cell.active:
                q = tuple(as_fraction(v) for v in cell.outputs)
                cont = Continuation((), q, spec.field.apply(q), SegmentMode.REGULAR)
            else:
                resolution = resolve_boundary(z, cell.active, spec, policy)
                cont = resolution.chosen
                if resolution.decision is Decision.BRANCH:
                    alternatives = resolution.continuations
                    traj.events.append(Event(
                        t, EventKind.BRANCH_POINT, tuple(i + 1 for i in cell.active), traj.branch,
                        " | ".join(c.describe(cell.active) for c in alternatives)))
                    for alt in alternatives[1:]:
                        spawn(run, alt)

        if previous_mode is not None and cont.mode is not previous_mode:
            traj.events.append(Event(t, EventKind.MODE_CHANGE, tuple(i + 1 for i in cont.sliding),
                                     traj.branch, f"{previous_mode.value}->{cont.mode.value}"))
        previous_mode = cont.mode
        x_start = None if run.x_last is None else z_to_x(z, run.x_last).x

        if cont.mode is SegmentMode.REST:
            traj.segments.append(TrajectorySegment(
                t, t, z, cont.velocity, cont.q, SegmentMode.REST, cont.sliding, cont.equilibrium, x_start))
            traj.events.append(Event(t, EventKind.EQUILIBRIUM_REACHED, (), traj.branch, cont.equilibrium.tag.value))
            traj.terminal = EventKind.EQUILIBRIUM_REACHED
            logger.debug(f"branch {traj.branch}: rest at t={t} ({cont.equilibrium.tag.value})")
            return traj

        dt, hits = time_to_boundary(z, cont.velocity, spec)
        timed_out = t_max is not None and t + dt > t_max
        if timed_out:
            dt = t_max - t
        elif dt == math.inf:
            raise InfeasibleMode(f"no surface ahead of z={[str(v) for v in z]} and no time limit")
        seg = TrajectorySegment(t, t + dt, z, cont.velocity, cont.q, cont.mode, cont.sliding, None, x_start)
        if check:
            _check_segment(seg, spec)
        traj.segments.append(seg)
        if run.x_last is not None:
            run.x_last = run.x_last + seg.x_velocity(spec)[-1] * dt
        run.z, run.t = seg.z_end, seg.t_end
        if timed_out:
            traj.events.append(Event(run.t, EventKind.TIMEOUT, (), traj.branch))
            traj.terminal = EventKind.TIMEOUT
            logger.debug(f"branch {traj.branch}: timeout at t={run.t}")
            return traj
        traj.events.append(Event(run.t, EventKind.BOUNDARY_HIT, tuple(i + 1 for i in hits), traj.branch))


def simulate(z0, spec, t_max=None, policy=BranchPolicy.DETERMINISTIC, snap_tol=None,
             max_events=None, max_branches=DEFAULT_MAX_BRANCHES, anchor=None, check_lyapunov=None):
    """Run the event solver from z0.

    Returns a Trajectory under the deterministic policy and a list of
    Trajectories (ordered by branch id) under the enumerate policy.
    """
    if isinstance(policy, str):
        policy = BranchPolicy(policy)
    raw = coords(z0)
    if len(raw) != spec.m:
        raise GeometryError(f"expected {spec.m} relative positions, got {len(raw)}")
    exact = not any(isinstance(v, float) for v in raw)
    tol = default_snap_tol(spec, exact) if snap_tol is None else as_fraction(snap_tol)
    z = _snap(as_fractions(raw), spec, tol)
    t_max = None if t_max is None else as_fraction(t_max)

    convergent = validate_gains_convergence(spec)
    if check_lyapunov is None:
        check_lyapunov = convergent
    if not convergent:
        logger.warning(f"gains {[str(v) for v in spec.k]} fail the convergence conditions; "
                       f"Lyapunov checks disabled")
        check_lyapunov = False
    cap = default_event_cap(spec, z) if max_events is None else int(max_events)
    anchor = None if anchor is None else as_fraction(anchor)

    root = _Run(Trajectory(spec, z, anchor=anchor), z, ZERO, anchor)
    queue = deque([root])
    finished = []
    counter = [1]

    def spawn(run, continuation):
        if counter[0] >= max_branches:
            logger.warning(f"branch cap {max_branches} reached; dropping alternative at t={run.t}")
            return
        traj = run.trajectory
        fork = Trajectory(spec, traj.z0, list(traj.segments), list(traj.events),
                          branch=counter[0], parent=traj.branch, anchor=anchor)
        # the branch point event belongs to the fork as well, under its own id
        fork.events[-1] = replace(fork.events[-1], branch=fork.branch)
        counter[0] += 1
        queue.append(_Run(fork, run.z, run.t, run.x_last, continuation))

    while queue:
        run = queue.popleft()
        finished.append(_advance(run, spec, t_max, policy, cap, check_lyapunov, spawn))

    finished.sort(key=lambda tr: tr.branch)
    for traj in finished:
        cls = traj.terminal_class
        logger.debug(f"branch {traj.branch}: {len(traj.events)} events, terminal "
                     f"{cls.tag.value if cls else 'Timeout'} at t={traj.end_time}")
    if policy is BranchPolicy.DETERMINISTIC:
        return finished[0]
    return finished
