from fractions import Fraction

import pytest

from quantform.config import load_scenario, resolve_scenario, scenario_from_mapping
from quantform.errors import ConfigError
from quantform.solver import BranchPolicy


def write(tmp_path, text, name="case.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_bundled_six_agent_scenario():
    config = load_scenario("six_agent_line")
    assert config.n == 6
    assert config.d == (1,) * 5
    assert config.k == (6, 5, 4, 3, 2)
    assert config.initial_z() == (Fraction(-1, 2), Fraction(-1, 2), -1, -2, -1)
    assert config.anchor_value() == 5
    assert config.t_max == 10
    assert config.name == "six_agent_line"


def test_defaults(tmp_path):
    config = load_scenario(write(tmp_path, "N=3\nD=1\nK=1,1\nZ0=2,4\n"))
    assert config.solver == "event"
    assert config.t_max == 20
    assert config.branch_policy is BranchPolicy.DETERMINISTIC
    assert config.anchor_value() is None
    assert config.name == "case"


def test_rationals_stay_exact(tmp_path):
    config = load_scenario(write(tmp_path, "# thirds\nN=3\nD=1/3\nK=2,1\nZ0=0.1,-1/3\n"))
    assert config.d == (Fraction(1, 3), Fraction(1, 3))
    assert config.initial_z() == (Fraction(1, 10), Fraction(-1, 3))


def test_bad_value_reports_line(tmp_path):
    path = write(tmp_path, "# header\nN=3\nD=1\nK=1,1\nZ0=abc,1\n")
    with pytest.raises(ConfigError) as info:
        load_scenario(path)
    assert info.value.line == 5
    assert f"{path}:5: Z0" in str(info.value)


def test_unknown_key_reports_line(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_scenario(write(tmp_path, "N=3\nD=1\nK=1,1\nZ0=1,1\nSPEED=2\n"))
    assert info.value.line == 5
    assert "unknown key" in str(info.value)


@pytest.mark.parametrize("text", [
    "N=3\nD=1\nK=1,1\n",
    "N=3\nD=1\nK=1,1\nZ0=1,1\nX0=0,1,2\n",
    "N=1\nD=1\nK=1\nZ0=1\n",
    "N=3\nD=1,2,3\nK=1,1\nZ0=1,1\n",
    "N=3\nD=0\nK=1,1\nZ0=1,1\n",
    "N=3\nD=1\nK=1,-1\nZ0=1,1\n",
    "N=3\nD=1\nK=1,1\nX0=0,1,2\nANCHOR=4\n",
    "N=3\nD=1\nK=1,1\nZ0=1,1\nSOLVER=hysteresis\n",
    "N=3\nD=1\nK=1,1\nZ0=1,1\nSOLVER=rk4\n",
    "N=3\nD=1\nK=1,1\nZ0=1,1\nT_MAX=0\n",
    "N=2.5\nD=1\nK=1\nZ0=1\n",
])
def test_invalid_scenarios(tmp_path, text):
    with pytest.raises(ConfigError):
        load_scenario(write(tmp_path, text))


def test_mapping_accepts_json_values():
    config = scenario_from_mapping(
        {"n": 3, "D": 0.1, "K": "1,1", "Z0": [0.3, 2], "branch_policy": "enumerate"},
        source="request")
    assert config.d == (Fraction(1, 10), Fraction(1, 10))
    assert config.z0 == (Fraction(3, 10), 2)
    assert config.branch_policy is BranchPolicy.ENUMERATE


def test_mapping_errors_name_the_source():
    with pytest.raises(ConfigError) as info:
        scenario_from_mapping({"N": 3, "D": 1, "K": "1,1"}, source="request")
    assert str(info.value).startswith("request: ")


def test_resolve_scenario(tmp_path):
    assert resolve_scenario("three_agent_corner").name == "three_agent_corner.cfg"
    path = write(tmp_path, "N=3\nD=1\nK=1,1\nZ0=1,1\n")
    assert resolve_scenario(str(path)) == path
    with pytest.raises(ConfigError):
        resolve_scenario("no_such_scenario")


def test_echo_keeps_exact_values(tmp_path):
    config = load_scenario(write(tmp_path, "N=3\nD=1/3\nK=1,1\nZ0=1,1\nSOLVER=euler\nH=1/100\n"))
    echo = config.echo()
    assert echo["d"] == ["1/3", "1/3"]
    assert echo["h"] == "1/100"
    assert echo["z0"] == ["1", "1"]
