import os

import pytest

import striaflow.cli as cli
from striaflow.diagnostics import RECORD_COLUMNS
from striaflow.runner import InvariantViolation

TINY = """
[grid]
n = 32

[time]
t_end = 2e-3
dt_max = 1e-3

[scenario]
name = taylor_green
marker_count = 16

[output]
record_stride = 1
"""


@pytest.fixture()
def tiny_ini(tmp_path):
    path = tmp_path / "tiny.ini"
    path.write_text(TINY, encoding="utf-8")
    return str(path)


def test_run_command_succeeds_and_writes(tiny_ini, tmp_path, capsys):
    out = tmp_path / "out"
    code = cli.main(["run", "--config", tiny_ini, "--out", str(out)])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "steps" in stdout
    assert "lifespan bound" in stdout
    for name in ("diagnostics.csv", "summary.json", "config_echo.ini"):
        assert (out / name).is_file()


def test_diagnose_command_prints_full_record(tiny_ini, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["run", "--config", tiny_ini, "--out", str(out)]) == 0
    capsys.readouterr()
    snap = os.path.join(str(out), "snapshots", "final")
    code = cli.main(["diagnose", "--snapshot", snap])
    assert code == 0
    stdout = capsys.readouterr().out
    for column in RECORD_COLUMNS:
        assert column in stdout
    # no boundary loop in this scenario, so the interior estimate is a dash
    assert " -" in stdout.splitlines()[-1]


def test_validate_command_reports_all_checks(capsys):
    code = cli.main(["validate", "--n", "64", "--seed", "0"])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "19/19 checks passed" in stdout
    assert "FAIL" not in stdout


def test_converge_command_clean_study(tmp_path, capsys):
    ini = tmp_path / "c.ini"
    ini.write_text("[grid]\nn = 16\n[scenario]\nname = taylor_green\n", encoding="utf-8")
    out = tmp_path / "conv"
    code = cli.main(["converge", "--config", str(ini), "--levels", "3",
                     "--out", str(out)])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "observed order" in stdout
    assert "FLAG" not in stdout
    assert (out / "convergence.csv").is_file()
    assert (out / "convergence.json").is_file()


def test_converge_flag_maps_to_exit_one(tiny_ini, monkeypatch, capsys):
    fake = {
        "temporal": {"dt": [0.1, 0.05], "diffs_omega": [1.0, 0.9],
                     "order": 0.2, "flag": True},
        "spatial": {"n": [32], "reference_n": 128, "errors_omega": [1.0],
                    "ratios": [1.1], "flag": False},
        "flag": True,
    }
    monkeypatch.setattr(cli, "converge", lambda cfg, levels, out_dir: fake)
    code = cli.main(["converge", "--config", tiny_ini, "--levels", "3"])
    assert code == 1
    captured = capsys.readouterr()
    assert "flag raised" in captured.err


def test_invariant_violation_maps_to_exit_one(tiny_ini, tmp_path, monkeypatch, capsys):
    def explode(cfg, out_dir=None, observer=None):
        raise InvariantViolation("density left its initial range")

    monkeypatch.setattr(cli, "run", explode)
    code = cli.main(["run", "--config", tiny_ini, "--out", str(tmp_path / "x")])
    assert code == 1
    assert "run failed" in capsys.readouterr().err


def test_bad_config_value_maps_to_exit_two(tmp_path, capsys):
    ini = tmp_path / "bad.ini"
    ini.write_text("[time]\ncourant = 2.0\n[scenario]\nname = taylor_green\n",
                   encoding="utf-8")
    code = cli.main(["run", "--config", str(ini), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "configuration error" in capsys.readouterr().err


def test_usage_errors_map_to_exit_two(capsys):
    assert cli.main([]) == 2
    assert cli.main(["run"]) == 2
    assert cli.main(["frobnicate"]) == 2
    capsys.readouterr()


def test_missing_config_file_maps_to_exit_three(tmp_path, capsys):
    code = cli.main(["run", "--config", str(tmp_path / "absent.ini"),
                     "--out", str(tmp_path / "o")])
    assert code == 3
    assert "i/o error" in capsys.readouterr().err


def test_missing_snapshot_maps_to_exit_three(tmp_path, capsys):
    code = cli.main(["diagnose", "--snapshot", str(tmp_path / "nowhere")])
    assert code == 3
    assert "snapshot error" in capsys.readouterr().err
