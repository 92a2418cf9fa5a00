import math
from fractions import Fraction

import numpy as np
import pytest

from quantform.errors import EventOverflow, GeometryError
from quantform.hull import EquilibriumTag, contains_zero, hull_at
from quantform.lyapunov import lyapunov
from quantform.model import FormationSpec, XState, quantizer_cell, x_to_z
from quantform.solver import (
    BranchPolicy,
    Decision,
    EventKind,
    SegmentMode,
    SurfaceKind,
    resolve_boundary,
    simulate,
    sliding_velocity,
    surface_kind,
    time_to_boundary,
)

THREE = FormationSpec(3, (1, 1), (1, 1))
SIX = FormationSpec(6, (1,) * 5, (6, 5, 4, 3, 2))
F = Fraction


def test_time_to_boundary_examples():
    assert time_to_boundary((3, 3), (-1, -1), THREE) == (2, (0, 1))
    assert time_to_boundary((F(1, 2), 3), (3, -3), THREE) == (F(1, 6), (0,))
    two = FormationSpec(2, (1,), (1,))
    assert time_to_boundary((2,), (0,), two) == (math.inf, ())


def test_time_to_boundary_only_looks_ahead():
    # leaving the d surface upwards: nothing ahead for z_1, z_2 reaches 0
    assert time_to_boundary((1, F(1, 2)), (1, -1), THREE) == (F(1, 2), (1,))


def test_resolve_semi_axis_slides():
    res = resolve_boundary((1, F(5, 2)), (0,), THREE)
    assert res.decision is Decision.SLIDE
    assert res.chosen.q == (F(1, 2), 1)
    assert res.chosen.velocity == (0, F(-3, 2))


def test_resolve_corner_rests():
    res = resolve_boundary((1, 1), (0, 1), THREE)
    assert res.decision is Decision.REST
    assert res.chosen.equilibrium.tag is EquilibriumTag.DESIRED
    assert contains_zero(hull_at((1, 1), THREE))[0]


def test_resolve_repulsive_axis():
    det = resolve_boundary((0, 2), (0,), THREE)
    assert det.decision is Decision.CROSS
    assert det.chosen.q == (-1, 1)
    enum = resolve_boundary((0, 2), (0,), THREE, BranchPolicy.ENUMERATE)
    assert enum.decision is Decision.BRANCH
    modes = sorted(c.mode.value for c in enum.continuations)
    assert modes == ["regular", "regular", "sliding"]
    slide = next(c for c in enum.continuations if c.mode is SegmentMode.SLIDING)
    assert slide.velocity == (0, F(-3, 2))


def test_resolve_rejects_wrong_active_set():
    with pytest.raises(GeometryError):
        resolve_boundary((F(1, 2), 2), (0,), THREE)
    with pytest.raises(GeometryError):
        resolve_boundary((1, 1), (0,), THREE)


@pytest.mark.parametrize("z, active, velocity", [
    ((1, 3), (0,), (0, F(-3, 2))),
    ((F(1, 2), 1), (1,), (F(3, 2), 0)),
    ((2, 1), (1,), (F(-3, 2), 0)),
])
def test_sliding_velocities(z, active, velocity):
    v, q = sliding_velocity(z, active, THREE)
    assert v == velocity
    assert all(-1 <= x <= 1 for x in q)


def test_straight_flight_to_corner():
    traj = simulate((3, 3), THREE)
    assert traj.terminal is EventKind.EQUILIBRIUM_REACHED
    assert traj.terminal_state.z == (1, 1)
    assert traj.end_time == 2
    assert [s.mode for s in traj.segments] == [SegmentMode.REGULAR, SegmentMode.REST]


def test_flight_then_slide():
    traj = simulate((2, 4), THREE)
    regular, sliding, rest = traj.segments
    assert regular.z_end == (1, 3) and regular.t_end == 1
    assert sliding.mode is SegmentMode.SLIDING and sliding.velocity == (0, F(-3, 2))
    assert rest.t_start == 1 + F(4, 3)
    assert traj.terminal_state.z == (1, 1)
    assert traj.sliding_duration == F(4, 3)


def test_six_agent_run_reaches_desired_shape():
    z0 = x_to_z(XState((0, F(1, 2), 1, 2, 4, 5))).z
    traj = simulate(z0, SIX, anchor=5)
    cls = traj.terminal_class
    assert cls.tag is EquilibriumTag.DESIRED
    assert traj.terminal_state.z == (-1,) * 5
    assert traj.end_time < 10
    assert traj.event_count < 200
    assert lyapunov(traj.terminal_state, SIX) == 0
    assert traj.replay() == traj.terminal_state.z
    values = [lyapunov(s.z_start, SIX) for s in traj.segments] + [0]
    assert all(b <= a for a, b in zip(values, values[1:]))
    final = traj.positions()[-1]
    gaps = [final[i + 1] - final[i] for i in range(5)]
    assert gaps == [1] * 5


def test_segments_are_contiguous_and_events_ordered():
    traj = simulate((F(-7, 3), F(5, 2)), THREE)
    for a, b in zip(traj.segments, traj.segments[1:]):
        assert a.t_end == b.t_start
        assert a.z_end == b.z_start
    times = [e.t for e in traj.events]
    assert times == sorted(times)


def test_origin_deterministic_leaves_by_literal_side():
    traj = simulate((0, 0), THREE)
    assert traj.segments[0].velocity == (1, 1)
    assert traj.terminal_state.z == (1, 1)


def test_origin_enumerate_reaches_every_equilibrium():
    branches = simulate((0, 0), THREE, policy=BranchPolicy.ENUMERATE)
    assert len(branches) == 17
    terminals = {b.terminal_state.z for b in branches}
    expected = {(a, b) for a in (-1, 0, 1) for b in (-1, 0, 1)}
    assert terminals == expected
    resting = [b for b in branches if b.terminal_state.z == (0, 0)]
    assert len(resting) == 1 and resting[0].end_time == 0
    assert [b.branch for b in branches] == list(range(17))


def test_branch_cap_drops_alternatives():
    branches = simulate((0, 0), THREE, policy=BranchPolicy.ENUMERATE, max_branches=4)
    assert len(branches) == 4


def test_interior_starts_never_branch():
    for z0 in [(3, 3), (F(1, 2), 3), (2, F(1, 3)), (F(1, 4), F(3, 4))]:
        branches = simulate(z0, THREE, policy=BranchPolicy.ENUMERATE)
        assert len(branches) == 1
        assert all(e.kind is not EventKind.BRANCH_POINT for e in branches[0].events)


def test_timeout_truncates_last_segment():
    traj = simulate((3, 3), THREE, t_max=1)
    assert traj.terminal is EventKind.TIMEOUT
    assert traj.terminal_state.z == (2, 2)
    assert traj.terminal_class is None


def test_event_cap():
    with pytest.raises(EventOverflow):
        simulate((2, 4), THREE, max_events=1)


def test_float_start_snaps_onto_surface():
    traj = simulate((1 + 1e-14, 3.0), THREE)
    assert traj.z0[0] == 1
    assert traj.segments[0].mode is SegmentMode.SLIDING


def _convergence_gains(rng, n):
    k = [F(1) + F(int(rng.integers(0, 5)), 2)]
    for _ in range(n - 3):
        k.append(k[-1] + 1 + F(int(rng.integers(0, 4)), 2))
    if n > 2:
        k.append(k[-1] + F(int(rng.integers(0, 4)), 2))
    return tuple(reversed(k))


def test_surface_structure_under_convergence_gains():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        spec = FormationSpec(n, tuple(F(int(v), 4) for v in rng.integers(2, 9, size=n - 1)),
                             _convergence_gains(rng, n))
        i = int(rng.integers(0, n - 1))
        z = []
        for j, d in enumerate(spec.d):
            # generic: strictly inside a cell
            z.append(d * F(int(rng.integers(1, 8)), 4) * (1 if rng.random() < 0.5 else -1) + F(1, 97))
        kind = int(rng.integers(0, 3))
        z[i] = (-spec.d[i], F(0), spec.d[i])[kind]
        assert not set(quantizer_cell(z, spec).active) - {i}
        expected = SurfaceKind.REPULSIVE if kind == 1 else SurfaceKind.ATTRACTING
        assert surface_kind(z, i, spec) is expected, (spec, z, i)


def test_positions_follow_agent_velocities():
    traj = simulate((3, 3), THREE, anchor=0)
    assert traj.position_at(0) == (6, 3, 0)
    assert traj.position_at(1) == (5, 3, 1)
    assert traj.positions()[-1] == (4, 3, 2)
    assert simulate((3, 3), THREE).position_at(1) is None
