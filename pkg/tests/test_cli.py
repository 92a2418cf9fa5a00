from fractions import Fraction

import pytest

from quantform.artifacts import SUMMARY_FILE, read_events, read_summary, read_trajectory
from quantform.cli import main
from quantform.config import load_scenario
from quantform.runner import run_scenario, sweep_point


@pytest.fixture
def scenario(tmp_path):
    def make(text, name="case.cfg"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return make


def test_run_six_agent_scenario(tmp_path, capsys):
    out = tmp_path / "fig"
    assert main(["run", "six_agent_line", "--out", str(out)]) == 0
    summary = read_summary(out)
    assert summary["terminal"] == "Desired"
    assert [p["exact"] for p in summary["terminal_state"]] == ["-1"] * 5
    assert summary["exit_code"] == 0
    assert summary["bit_budget"]["total"] == 20
    assert summary["bit_budget"]["stated_total"] == 22

    rows = read_trajectory(out)
    assert rows[0]["t_exact"] == "0"
    assert [rows[0][f"x_{i}_exact"] for i in range(1, 7)] == ["0", "1/2", "1", "2", "4", "5"]
    events = read_events(out)
    assert events[-1]["kind"] == "EquilibriumReached"
    assert "Desired" in capsys.readouterr().out


def test_report_prints_bandwidth(tmp_path, capsys):
    out = tmp_path / "fig"
    main(["run", "six_agent_line", "--out", str(out)])
    capsys.readouterr()
    assert main(["report", str(out)]) == 0
    text = capsys.readouterr().out
    assert "terminal: Desired" in text
    assert "agents 2–5: 4 bits, agents 1 and 6: 2 bits" in text
    assert "stated total 4n-2: 22 bits" in text


def test_reruns_are_byte_identical(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    main(["run", "three_agent_origin", "--out", str(first)])
    main(["run", "three_agent_origin", "--out", str(second)])
    for name in ("trajectory.csv", "events.jsonl", SUMMARY_FILE):
        assert (first / name).read_bytes() == (second / name).read_bytes()


@pytest.mark.parametrize("name", ["three_agent_corner", "three_agent_origin", "six_agent_line_euler"])
def test_summary_file_matches_in_memory_run(tmp_path, name):
    out = tmp_path / name
    main(["run", name, "--out", str(out)])
    assert read_summary(out) == run_scenario(load_scenario(name)).summary


def test_corner_summary_times(tmp_path):
    out = tmp_path / "corner"
    main(["run", "three_agent_corner", "--out", str(out)])
    branch = read_summary(out)["branches"][0]
    assert branch["terminal_time"] == "2"
    assert branch["time_to_desired"] == "2"


def test_origin_enumerates_every_branch(tmp_path):
    out = tmp_path / "origin"
    code = main(["run", "three_agent_origin", "--out", str(out)])
    summary = read_summary(out)
    assert summary["solver"]["branches"] == 17
    terminals = {b["terminal"] for b in summary["branches"]}
    assert terminals == {"Desired", "Degenerate"}
    assert code == 2
    branch_ids = {row["branch"] for row in read_trajectory(out)}
    assert len(branch_ids) == 17


def test_euler_run_reports_chattering(tmp_path, capsys):
    out = tmp_path / "euler"
    assert main(["run", "six_agent_line_euler", "--out", str(out)]) == 0
    capsys.readouterr()
    main(["report", str(out)])
    text = capsys.readouterr().out
    assert "z_1 chattering band" in text


def test_hysteresis_override_needs_band(tmp_path, capsys):
    code = main(["run", "three_agent_corner", "--solver", "hysteresis", "--out", str(tmp_path / "h")])
    assert code == 1
    assert "EPS_H" in capsys.readouterr().err


def test_timeout_exit_code(tmp_path, capsys, scenario):
    path = scenario("N=3\nD=1\nK=1,1\nZ0=3,3\nT_MAX=1\n")
    out = tmp_path / "slow"
    assert main(["run", path, "--out", str(out)]) == 3
    capsys.readouterr()
    main(["report", str(out)])
    text = capsys.readouterr().out
    assert "did not converge" in text
    assert "nearest equilibrium: (1, 1), max-norm distance 1" in text


def test_t_max_override(tmp_path, scenario):
    path = scenario("N=3\nD=1\nK=1,1\nZ0=3,3\n")
    assert main(["run", path, "--t-max", "1/2", "--out", str(tmp_path / "o")]) == 3
    assert main(["run", path, "--t-max", "soon", "--out", str(tmp_path / "p")]) == 1


def test_bad_config_exit_code(tmp_path, capsys, scenario):
    path = scenario("N=3\nD=1\nK=1,x\nZ0=1,1\n")
    assert main(["run", path, "--out", str(tmp_path / "bad")]) == 1
    assert f"{path}:3" in capsys.readouterr().err


def test_report_on_missing_directory(tmp_path):
    assert main(["report", str(tmp_path / "nothing")]) == 1


def test_sweep_small_grid(tmp_path, scenario):
    path = scenario("N=3\nD=1\nK=1,1\nZ0=0,0\nGRID_MIN=-2\nGRID_MAX=2\nGRID_POINTS=5\n")
    out = tmp_path / "sweep"
    assert main(["sweep", path, "--out", str(out)]) == 0
    summary = read_summary(out)
    assert summary["points"] == 16
    assert summary["agreement_rate"] == 1.0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert len(lines) == 17


def test_sweep_axes_with_enumeration(tmp_path, scenario):
    path = scenario("N=3\nD=1\nK=1,1\nZ0=0,0\nGRID_MIN=-2\nGRID_MAX=2\nGRID_POINTS=3\n"
                    "GRID_AXES=only\nBRANCH_POLICY=enumerate\n")
    out = tmp_path / "axes"
    assert main(["sweep", path, "--out", str(out)]) == 0
    assert read_summary(out)["points"] == 5


def test_empty_sweep(tmp_path, scenario):
    path = scenario("N=3\nD=1\nK=1,1\nZ0=0,0\nGRID_POINTS=0\n")
    out = tmp_path / "empty"
    assert main(["sweep", path, "--out", str(out)]) == 0
    summary = read_summary(out)
    assert summary["points"] == 0
    assert summary["agreement_rate"] is None


def test_report_on_sweep_directory(tmp_path, capsys, scenario):
    path = scenario("N=3\nD=1\nK=1,1\nZ0=0,0\nGRID_MIN=-2\nGRID_MAX=2\nGRID_POINTS=5\n")
    out = tmp_path / "sweep"
    main(["sweep", path, "--out", str(out)])
    capsys.readouterr()
    assert main(["report", str(out)]) == 0
    text = capsys.readouterr().out
    assert "16 starts" in text
    assert "agreed: 16, agreement 100.0%" in text


def test_report_on_empty_sweep(tmp_path, capsys, scenario):
    path = scenario("N=3\nD=1\nK=1,1\nZ0=0,0\nGRID_POINTS=0\n")
    out = tmp_path / "empty"
    main(["sweep", path, "--out", str(out)])
    capsys.readouterr()
    assert main(["report", str(out)]) == 0
    assert "no start was compared" in capsys.readouterr().out


def test_random_sweep_reruns_are_byte_identical(tmp_path, scenario):
    path = scenario("N=3\nD=1\nK=1,1\nZ0=0,0\nGRID_MIN=-2\nGRID_MAX=2\nSAMPLES=12\nSEED=7\n")
    first, second = tmp_path / "a", tmp_path / "b"
    code = main(["sweep", path, "--out", str(first)])
    assert main(["sweep", path, "--out", str(second)]) == code
    for name in ("sweep.csv", SUMMARY_FILE):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    assert len((first / "sweep.csv").read_text().splitlines()) == 13
    assert read_summary(first)["points"] == 12


def test_sweep_point_uses_snap_tolerance(scenario):
    text = "N=3\nD=1\nK=1,1\nZ0=0,0\n"
    start = (1 + Fraction(1, 10**13), 1 + Fraction(1, 10**13))
    snapped = sweep_point(start, load_scenario(scenario(text + "SNAP_TOL=1e-9\n", "snapped.cfg")))
    assert snapped["terminal_time"] == "0"
    # without a tolerance the start flies the last 1e-13 into (1, 1)
    unsnapped = sweep_point(start, load_scenario(scenario(text, "unsnapped.cfg")))
    assert unsnapped["terminal_time"] == "1/10000000000000"
    assert snapped["simulated"] == unsnapped["simulated"] == ["(1,1)"]
