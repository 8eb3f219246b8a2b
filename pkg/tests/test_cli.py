"""Command line interface: exit codes, printed values, and CSV output."""

import numpy as np
import pytest

from vrnetsim.cli import main
from vrnetsim.game import Action, GameTable, MixedStrategy, save_profile, save_table


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "scenario.yaml"
    path.write_text(
        "n_sbs: 2\n"
        "n_users: 4\n"
        "area_radius_m: 100.0\n"
        "sbs_coverage_m: 100.0\n"
        "n_dl_blocks: 2\n"
        "n_ul_blocks: 2\n"
        "block_bandwidth_hz: 1.0e7\n"
    )
    return str(path)


def test_no_command_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


# --- demand-rate -----------------------------------------------------------------


def test_demand_rate_defaults(capsys):
    assert main(["demand-rate"]) == 0
    out = capsys.readouterr().out
    assert "rate_bps: 26542080" in out
    assert "rate_mbit: 25.3125" in out


def test_demand_rate_uncompressed(capsys):
    assert main(["demand-rate", "--compression", "1"]) == 0
    out = capsys.readouterr().out
    assert "rate_mbit: 3796.875" in out


def test_demand_rate_identity(capsys):
    argv = [
        "demand-rate", "--width", "1", "--height", "1", "--depth", "1",
        "--fps", "1", "--eyes", "1", "--compression", "1",
    ]
    assert main(argv) == 0
    assert "rate_bps: 1" in capsys.readouterr().out


def test_demand_rate_rejects_bad_compression(capsys):
    assert main(["demand-rate", "--compression", "0"]) == 2


# --- count-actions -----------------------------------------------------------------


def test_count_actions_single(capsys):
    assert main(["count-actions", "--users", "1", "--dl", "1", "--ul", "1"]) == 0
    assert capsys.readouterr().out.strip() == "1"


def test_count_actions_enumerate_match(capsys):
    argv = [
        "count-actions", "--users", "2", "--dl", "3", "--ul", "2", "--enumerate"
    ]
    assert main(argv) == 0
    assert capsys.readouterr().out.strip() == "4 4 MATCH"


def test_count_actions_infeasible(capsys):
    assert main(["count-actions", "--users", "3", "--dl", "2", "--ul", "5"]) == 1
    assert "infeasible" in capsys.readouterr().err


# --- verify-ne --------------------------------------------------------------------


def coordination_table() -> GameTable:
    pair = (
        Action(dl=(2,), ul=((0,),)),
        Action(dl=(2,), ul=((1,),)),
    )
    utilities = np.zeros((2, 2, 2))
    utilities[:, 0, 0] = 1.0
    utilities[:, 1, 1] = 0.6
    return GameTable(sbs_ids=(0, 1), actions=(pair, pair), utilities=utilities)


def test_verify_ne_accepts_equilibrium(tmp_path, capsys):
    table_path = tmp_path / "table.json"
    profile_path = tmp_path / "profile.json"
    save_table(coordination_table(), table_path)
    save_profile(
        [MixedStrategy(np.array([1.0, 0.0])), MixedStrategy(np.array([1.0, 0.0]))],
        profile_path,
    )
    assert main(["verify-ne", str(table_path), str(profile_path)]) == 0
    assert "verdict: equilibrium" in capsys.readouterr().out


def test_verify_ne_rejects_non_equilibrium(tmp_path, capsys):
    table_path = tmp_path / "table.json"
    profile_path = tmp_path / "profile.json"
    save_table(coordination_table(), table_path)
    save_profile(
        [MixedStrategy(np.array([0.0, 1.0])), MixedStrategy(np.array([1.0, 0.0]))],
        profile_path,
    )
    assert main(["verify-ne", str(table_path), str(profile_path)]) == 1
    out = capsys.readouterr().out
    assert "verdict: not an equilibrium" in out


def test_verify_ne_bad_file(tmp_path, capsys):
    bad = tmp_path / "junk.json"
    bad.write_text("{not json")
    good = tmp_path / "profile.json"
    save_profile([MixedStrategy(np.array([1.0]))], good)
    assert main(["verify-ne", str(bad), str(good)]) == 2


# --- run ---------------------------------------------------------------------------


def test_run_writes_deterministic_csv(tiny_config, tmp_path, capsys):
    out_a = tmp_path / "a.csv"
    out_b = tmp_path / "b.csv"
    argv = [
        "run", tiny_config, "--policy", "esn", "--slots", "10",
        "--seed", "3", "--mode", "frozen",
    ]
    assert main(argv + ["--out", str(out_a)]) == 0
    first = capsys.readouterr().out
    assert main(argv + ["--out", str(out_b)]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()
    assert "final_total_utility:" in first
    assert "serviced_fraction:" in first


def test_run_missing_config(tmp_path):
    assert main(["run", str(tmp_path / "none.yaml")]) == 2


def test_run_unknown_config_key(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("n_sbs: 2\nmystery_knob: 5\n")
    assert main(["run", str(path)]) == 2


def test_run_exhaustive_live_is_usage_error(tiny_config):
    argv = ["run", tiny_config, "--policy", "exhaustive", "--mode", "live"]
    assert main(argv) == 2


# --- sweep -------------------------------------------------------------------------


def test_sweep_single_point(tiny_config, tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    argv = [
        "sweep", tiny_config, "--axis", "n_users", "--values", "3",
        "--policies", "propfair", "--runs", "2", "--slots", "2",
        "--mode", "frozen", "--out", str(out),
    ]
    assert main(argv) == 0
    text = capsys.readouterr().out
    assert "axis_value=3 policy=propfair" in text
    lines = out.read_text().splitlines()
    assert len(lines) == 3  # header + 2 runs


def test_sweep_bad_policy(tiny_config, tmp_path):
    argv = [
        "sweep", tiny_config, "--axis", "n_users", "--values", "3",
        "--policies", "dqn", "--out", str(tmp_path / "s.csv"),
    ]
    assert main(argv) == 2


# --- check-esn ----------------------------------------------------------------------


def test_check_esn_defaults_pass(capsys):
    assert main(["check-esn"]) == 0
    out = capsys.readouterr().out
    assert "verdict: pass" in out
    assert "mean_abs_error:" in out


def test_check_esn_tight_tolerance_fails(capsys):
    assert main(["check-esn", "--tol", "1e-9"]) == 1
    assert "verdict: fail" in capsys.readouterr().out
