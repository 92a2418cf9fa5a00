from fractions import Fraction

import numpy as np
import pytest

from quantform.errors import SpecError
from quantform.model import (
    FormationSpec,
    Location,
    XState,
    bit_budget,
    locate,
    quantize,
    quantizer_cell,
    speed_bound,
    validate_gains_convergence,
    validate_gains_equilibrium,
    vector_field_x,
    vector_field_z,
    x_to_z,
    z_to_x,
)

SIX = FormationSpec(6, (1,) * 5, (6, 5, 4, 3, 2))
THREE = FormationSpec(3, (1, 1), (1, 1))


@pytest.mark.parametrize("z, d, expected", [
    (2, 1, 1),
    (Fraction(1, 2), 1, -1),
    (Fraction(-1, 2), 1, 1),
    (-2, 1, -1),
    (0, 1, -1),
    (1, 1, 1),
    (-1, 1, -1),
])
def test_quantize_convention(z, d, expected):
    assert quantize(z, d) == expected


def test_spec_rejects_bad_instances():
    with pytest.raises(SpecError):
        FormationSpec(1, (), ())
    with pytest.raises(SpecError):
        FormationSpec(3, (1, 0), (1, 1))
    with pytest.raises(SpecError):
        FormationSpec(3, (1, 1), (1, -1))
    with pytest.raises(SpecError):
        FormationSpec(3, (1,), (1, 1))


def test_field_matrix_shape():
    rows = SIX.field.rows
    assert rows[0][:2] == (-7, 5)
    assert rows[2][1:4] == (1, -5, 3)
    assert rows[4][3:] == (1, -3)
    assert np.allclose(SIX.field.as_array()[1], [1, -6, 4, 0, 0])


def test_six_agent_initial_velocities():
    x0 = XState((0, Fraction(1, 2), 1, 2, 4, 5))
    z0 = x_to_z(x0)
    assert z0.z == (Fraction(-1, 2), Fraction(-1, 2), -1, -2, -1)
    assert vector_field_x(x0, SIX) == (-6, -4, 5, 2, 1, -1)
    assert vector_field_z(z0, SIX) == (-2, -9, 3, 1, 2)


def test_z_field_matches_difference_of_x_field():
    rng = np.random.default_rng(3)
    for _ in range(50):
        x = tuple(Fraction(int(v), 4) for v in rng.integers(-20, 20, size=6))
        vx = vector_field_x(x, SIX)
        vz = vector_field_z(x_to_z(x), SIX)
        assert vz == tuple(vx[i] - vx[i + 1] for i in range(5))


def test_z_to_x_inverts_x_to_z():
    x = XState((3, 1, Fraction(1, 2), -2))
    assert z_to_x(x_to_z(x), -2).x == x.x


def test_locate_and_cell():
    assert locate(Fraction(1, 2), 1) is Location.POS_INNER
    assert locate(-1, 1) is Location.AT_NEG
    assert locate(Fraction(1, 10**13), 1, tol=Fraction(1, 10**12)) is Location.AT_ZERO
    cell = quantizer_cell((1, Fraction(5, 2)), THREE)
    assert cell.active == (0,)
    assert cell.outputs == (None, 1)


def test_gain_conditions():
    assert validate_gains_equilibrium(SIX)
    assert validate_gains_convergence(SIX)
    assert validate_gains_convergence(THREE)
    assert not validate_gains_equilibrium(FormationSpec(3, (1, 1), (1, 3)))
    # equilibrium holds but convergence needs k_2 >= k_3 + 1
    weak = FormationSpec(4, (1, 1, 1), (2, 2, Fraction(3, 2)))
    assert validate_gains_equilibrium(weak)
    assert not validate_gains_convergence(weak)


def test_convergence_gains_imply_equilibrium_gains():
    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        k = tuple(Fraction(int(v), 2) for v in rng.integers(1, 17, size=n - 1))
        spec = FormationSpec(n, (1,) * (n - 1), k)
        if validate_gains_convergence(spec):
            checked += 1
            assert validate_gains_equilibrium(spec)
    assert checked > 0


def test_speed_bound_is_row_sum():
    assert speed_bound(THREE) == (3, 3)
    assert speed_bound(SIX) == (12, 11, 9, 7, 4)


def test_bit_budget():
    budget = bit_budget(SIX)
    assert budget.per_agent == (2, 4, 4, 4, 4, 2)
    assert budget.total == 20
    assert budget.stated_total == 22
    assert "agents 2–5: 4 bits, agents 1 and 6: 2 bits" in budget.lines()
