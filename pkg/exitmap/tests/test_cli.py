import json

import pytest

from exitmap.cli import main
from exitmap.scenarios import BUILTIN_SCENARIOS, NEGATIVE_CONTROLS


def _stdout_json(capsys):
    return json.loads(capsys.readouterr().out)


def test_list_names_builtin_scenarios_and_flows(capsys):
    assert main(["list"]) == 0
    listing = _stdout_json(capsys)
    assert "exmap" in listing["scenarios"]
    assert "affine_focus" in listing["flows"]


def test_schema_command_prints_the_scenario_schema(capsys):
    assert main(["schema"]) == 0
    assert "properties" in _stdout_json(capsys)


def test_missing_command_is_a_usage_error():
    assert main([]) == 2


def test_scenario_without_region_exits_with_schema_error(tmp_path, capsys):
    path = tmp_path / "half.json"
    path.write_text(json.dumps({"name": "half", "flow": {"builtin": "exmap"}}), encoding="utf-8")
    assert main(["exitmap", "--scenario", str(path), "--out", str(tmp_path)]) == 2
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["error"] == "ScenarioError"
    assert error["exit_code"] == 2


def test_unknown_builtin_exits_with_schema_error(tmp_path):
    assert main(["exitmap", "--builtin", "warp_drive", "--out", str(tmp_path)]) == 2


def test_exitmap_writes_first_out_and_first_in_tables(tmp_path, capsys):
    code = main(["exitmap", "--builtin", "exmap", "--samples", "16", "--horizon", "10",
                 "--out", str(tmp_path)])
    assert code == 0
    header = (tmp_path / "first_out.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "s,status,T,exit_s,type_label,horizon,graze_count"
    assert (tmp_path / "first_in.csv").exists()
    summary = _stdout_json(capsys)
    assert sum(summary["first_out"].values()) == 16


def test_exitmap_output_is_byte_identical_across_runs(tmp_path):
    args = ["exitmap", "--builtin", "exmap", "--samples", "16", "--horizon", "10"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    first = (tmp_path / "a" / "first_out.csv").read_bytes()
    assert first == (tmp_path / "b" / "first_out.csv").read_bytes()


def test_json_format_writes_row_objects(tmp_path):
    code = main(["exitmap", "--builtin", "exmap", "--samples", "16", "--horizon", "10",
                 "--format", "json", "--out", str(tmp_path)])
    assert code == 0
    rows = json.loads((tmp_path / "first_out.json").read_text(encoding="utf-8"))
    assert len(rows) == 16
    assert set(rows[0]) == {"s", "status", "T", "exit_s", "type_label", "horizon", "graze_count"}


def test_failed_check_only_changes_the_exit_code_when_strict(tmp_path, capsys):
    args = ["check", "--builtin", "control_bc", "--out", str(tmp_path)]
    assert main(args) == 0
    summary = _stdout_json(capsys)
    assert summary["checks"]["forbidden-BC"] == "fail"
    assert main([*args, "--strict"]) == 1
    assert (tmp_path / "checks.json").exists()


def test_checking_cooling_has_nothing_to_check(tmp_path):
    assert main(["check", "--builtin", "cooling", "--out", str(tmp_path)]) == 2


def test_hybrid_bouncing_ball_stops_at_zeno(tmp_path, capsys):
    assert main(["hybrid", "--builtin", "bouncing_ball", "--out", str(tmp_path)]) == 0
    summary = _stdout_json(capsys)
    assert summary["termination"] == "zeno-detected"
    jumps = (tmp_path / "jumps.csv").read_text(encoding="utf-8").splitlines()
    assert jumps[0] == "n,t,pre_x,pre_y,post_x,post_y"
    assert len(jumps) - 1 == summary["jumps"]


def test_realize_neg_round_trips(tmp_path, capsys):
    assert main(["realize", "--builtin", "realize_neg", "--out", str(tmp_path)]) == 0
    summary = _stdout_json(capsys)
    assert summary["max_error"] < 1e-5
    assert (tmp_path / "realization.json").exists()


@pytest.mark.parametrize("command", ["classify", "typeseq"])
def test_boundary_commands_write_their_tables(command, tmp_path):
    code = main([command, "--builtin", "exmap", "--samples", "16", "--horizon", "10",
                 "--out", str(tmp_path)])
    assert code == 0
    stem = "classification" if command == "classify" else "type_sequence"
    assert (tmp_path / f"{stem}.csv").exists()


def test_svg_plots_are_reproducible(tmp_path):
    args = ["typeseq", "--builtin", "exmap", "--samples", "16", "--horizon", "10", "--svg"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    first = (tmp_path / "a" / "type_sequence.svg").read_bytes()
    assert first.startswith(b"<?xml")
    assert first == (tmp_path / "b" / "type_sequence.svg").read_bytes()


CHECKED_BUILTINS = [
    *sorted(set(BUILTIN_SCENARIOS) - set(NEGATIVE_CONTROLS) - {"zeno_shear", "cooling"}),
    "affine(-1)",
    "impact_oscillator(2)",
    "impact_oscillator(5)",
]


@pytest.mark.parametrize("name", CHECKED_BUILTINS)
def test_strict_check_passes_on_every_builtin_scenario(name, tmp_path, capsys):
    assert main(["check", "--builtin", name, "--strict", "--out", str(tmp_path)]) == 0
    summary = _stdout_json(capsys)
    assert summary["failed"] == []
    assert "fail" not in summary["checks"].values()


@pytest.mark.parametrize("name", NEGATIVE_CONTROLS)
def test_strict_check_fails_on_every_negative_control(name, tmp_path, capsys):
    assert main(["check", "--builtin", name, "--strict", "--out", str(tmp_path)]) == 1
    assert _stdout_json(capsys)["failed"]


def test_check_on_zeno_shear_reports_the_induced_system_failure(tmp_path, capsys):
    assert main(["check", "--builtin", "zeno_shear", "--out", str(tmp_path)]) == 1
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error["error"] == "NotInducedError"
    assert error["exit_code"] == 1
    assert error["report"]["unresolved"]


def test_check_on_the_bouncing_ball_tests_the_landing_domain(tmp_path, capsys):
    assert main(["check", "--builtin", "bouncing_ball", "--out", str(tmp_path)]) == 0
    assert _stdout_json(capsys)["checks"] == {"image-in-domain": "pass"}
