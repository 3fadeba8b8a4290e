import math
import os

import numpy as np
import pytest

from striaflow.config import config_digest, parse_config_text
from striaflow.diagnostics import RECORD_COLUMNS
from striaflow.dynamics import StratifiedState
from striaflow.grid import field_from_values
from striaflow.runner import (
    InvariantViolation,
    TELEMETRY_COLUMNS,
    diagnose_snapshot,
    run,
    spatial_refinement,
    temporal_refinement,
    validate,
)

TINY = """
[grid]
n = 32

[time]
t_end = 3e-3
dt_max = 1e-3

[scenario]
name = taylor_green
marker_count = 16

[output]
record_stride = 1
snapshot_stride = 2
"""


@pytest.fixture(scope="module")
def tiny_cfg():
    return parse_config_text(TINY)


@pytest.fixture(scope="module")
def tiny_run(tiny_cfg, tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny_run")
    return run(tiny_cfg, out_dir=str(out))


def test_run_step_and_record_counts(tiny_run):
    # t_end / dt_max = 3 steps; record_stride 1 samples every step plus the
    # final state.
    assert tiny_run.steps == 3
    assert len(tiny_run.records) == 4
    times = [r.t for r in tiny_run.records]
    assert times == sorted(times)
    assert times[0] == 0.0
    assert abs(times[-1] - 3e-3) < 1e-15
    assert tiny_run.u_integral > 0.0


def test_run_summary_contents(tiny_run, tiny_cfg):
    s = tiny_run.summary
    assert s["scenario"] == "taylor_green"
    assert s["n"] == 32
    assert s["steps"] == 3
    assert s["records"] == 4
    assert s["config_digest"] == config_digest(tiny_cfg)
    assert s["lifespan_bound"] > 0.0
    for key in ("l0", "a0", "s0", "gamma0", "r0", "p", "q", "delta"):
        assert key in s["lifespan_inputs"]
    lo0, hi0 = s["rho_initial_range"]
    lo1, hi1 = s["rho_final_range"]
    assert lo1 >= lo0 - s["rho_tolerance"]
    assert hi1 <= hi0 + s["rho_tolerance"]
    assert s["div_x_rel_initial"] < 1e-12
    assert s["i_x_initial"] > 0.9


def test_run_writes_output_tree(tiny_run):
    out = tiny_run.out_dir
    for name in ("config_echo.ini", "diagnostics.csv", "pressure_telemetry.csv",
                 "summary.json"):
        assert os.path.isfile(os.path.join(out, name))
    snaps = sorted(os.listdir(os.path.join(out, "snapshots")))
    # stride 2 fires at steps 0 and 2, plus the terminal snapshot
    assert snaps == ["final", "step_000000", "step_000002"]


def test_run_csv_headers_and_row_counts(tiny_run):
    out = tiny_run.out_dir
    with open(os.path.join(out, "diagnostics.csv"), encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln]
    assert lines[0] == ",".join(RECORD_COLUMNS)
    assert len(lines) - 1 == len(tiny_run.records)
    with open(os.path.join(out, "pressure_telemetry.csv"), encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln]
    assert lines[0] == ",".join(TELEMETRY_COLUMNS)
    assert len(lines) - 1 == tiny_run.steps


def test_config_echo_reparses_to_same_config(tiny_run, tiny_cfg):
    with open(os.path.join(tiny_run.out_dir, "config_echo.ini"), encoding="utf-8") as fh:
        echoed = parse_config_text(fh.read())
    assert echoed == tiny_cfg


def test_runs_are_deterministic(tiny_cfg):
    rows_a = [r.csv_row() for r in run(tiny_cfg).records]
    rows_b = [r.csv_row() for r in run(tiny_cfg).records]
    assert rows_a == rows_b


def test_diagnose_snapshot_matches_final_record(tiny_run, tiny_cfg):
    rec = diagnose_snapshot(
        os.path.join(tiny_run.out_dir, "snapshots", "final"),
        p=tiny_cfg.p, q=tiny_cfg.q,
    )
    last = tiny_run.records[-1]
    assert rec.t == last.t
    for name in ("l", "a", "gamma", "s", "i_x", "rho_min", "rho_max"):
        assert abs(getattr(rec, name) - getattr(last, name)) < 1e-12


def test_observer_sees_every_accepted_step(tiny_cfg):
    seen = []
    run(tiny_cfg, observer=lambda k, st: seen.append(k))
    assert seen == [0, 1, 2]


def test_density_escape_trips_monitor_and_flushes(tiny_cfg, tmp_path):
    def saboteur(step, st):
        if step != 1:
            return None
        vals = st.rho.values().copy()
        vals[3, 5] -= 0.7
        return StratifiedState(
            time=st.time,
            rho=field_from_values(st.grid, vals),
            omega=st.omega,
            x_fields=st.x_fields,
        )

    out = tmp_path / "broken"
    with pytest.raises(InvariantViolation, match="maximum principle"):
        run(tiny_cfg, out_dir=str(out), observer=saboteur)
    # partial output still lands on disk: the tables plus the last state
    # that passed the monitors
    assert (out / "diagnostics.csv").is_file()
    assert (out / "pressure_telemetry.csv").is_file()
    assert (out / "snapshots" / "last_good" / "meta.json").is_file()
    assert not (out / "summary.json").exists()


def test_validation_battery_all_green():
    results = validate()
    assert len(results) == 19
    names = [r.name for r in results]
    assert len(set(names)) == len(names)
    failed = [r for r in results if not r.passed]
    assert not failed, [(r.name, r.detail) for r in failed]


@pytest.mark.parametrize(
    "mutation, expected",
    [
        ("flip_baroclinic", "tendency_consistency"),
        ("detune_ladder", "ladder_partition"),
    ],
)
def test_validation_battery_isolates_injected_faults(mutation, expected):
    results = validate(mutations={mutation})
    failed = sorted(r.name for r in results if not r.passed)
    assert failed == [expected]


def test_validation_rejects_unknown_mutation():
    with pytest.raises(ValueError, match="unknown mutation"):
        validate(mutations={"melt_cpu"})


def test_temporal_refinement_estimates_fourth_order():
    cfg = parse_config_text("[grid]\nn = 32\n[scenario]\nname = taylor_green\n")
    rep = temporal_refinement(cfg, levels=3, t_horizon=0.08, coarse_steps=2)
    assert rep["monotone"]
    assert not rep["flag"]
    assert 3.5 <= rep["order"] <= 4.5
    assert len(rep["dt"]) == 3
    assert rep["dt"][0] == 2.0 * rep["dt"][1]


def test_temporal_refinement_needs_three_levels():
    cfg = parse_config_text("[scenario]\nname = taylor_green\n")
    with pytest.raises(ValueError, match="3 levels"):
        temporal_refinement(cfg, levels=2)


def test_spatial_refinement_shows_spectral_decay():
    cfg = parse_config_text("[grid]\nn = 16\n[scenario]\nname = taylor_green\n")
    rep = spatial_refinement(cfg, levels=2, t_horizon=0.05, dt=0.01)
    assert rep["n"] == [16, 32]
    assert rep["reference_n"] == 64
    assert not rep["flag"]
    assert rep["ratios"][0] > 10.0
    assert rep["errors_omega"][1] < rep["errors_omega"][0]


def test_spatial_refinement_needs_two_levels():
    cfg = parse_config_text("[scenario]\nname = taylor_green\n")
    with pytest.raises(ValueError, match="2 levels"):
        spatial_refinement(cfg, levels=1)
