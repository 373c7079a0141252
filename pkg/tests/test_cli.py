"""Command-line interface: exit codes, outputs, determinism, precedence."""

import csv
import json
import math

import pytest

from pneumann.cli import (
    EXIT_CERTIFICATE,
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_SOLVER,
    RunConfig,
    main,
    parse_config,
    serialize_config,
)


def _read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def test_solve_success_writes_all_outputs(tmp_path):
    out = tmp_path / "run"
    code = main([
        "solve", "--p", "3", "--q", "6", "--N", "1",
        "--n", "128", "--out", str(out),
    ])
    assert code == EXIT_OK
    payload = _read_json(out / "solve_result.json")
    assert payload["p"] == 3.0 and payload["q"] == 6.0
    assert abs(payload["c"] - 0.3268198354) <= 1e-3
    assert payload["residual"] <= 1e-9
    certs = payload["certificates"]
    assert certs["ray_max_at_one"] is True
    assert certs["nonconstancy_signs_consistent"] is True
    assert certs["phase"]["increase_violations"] == 0
    assert certs["cross_oracle_sup_gap"] <= max(1e-3, 1.0 / 128)
    with open(out / "profile.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["r", "u", "du"]
    assert len(rows) == 1 + 129
    assert (out / "profile.png").stat().st_size > 0


def test_solve_rejects_subcritical_exponent(tmp_path, capsys):
    code = main(["solve", "--p", "3", "--q", "2", "--out", str(tmp_path)])
    assert code == EXIT_CONFIG
    assert "invalid configuration" in capsys.readouterr().err


def test_solve_reports_collapse_to_constant(tmp_path, capsys):
    # in this regime the only nondecreasing solution is the constant, and
    # the solver must say so via the solver-failure exit code
    code = main([
        "solve", "--p", "2", "--q", "10", "--N", "1",
        "--n", "128", "--out", str(tmp_path),
    ])
    assert code == EXIT_SOLVER
    assert "solver failure" in capsys.readouterr().err


def test_solve_deterministic_outputs(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = main([
            "solve", "--p", "3", "--q", "6", "--N", "1",
            "--n", "128", "--out", str(out),
        ])
        assert code == EXIT_OK
        outs.append(out)
    for fname in ("solve_result.json", "profile.csv"):
        b0 = (outs[0] / fname).read_bytes()
        b1 = (outs[1] / fname).read_bytes()
        assert b0 == b1, fname


def test_sweep_requires_exponent_list(tmp_path, capsys):
    code = main(["sweep", "--p", "2", "--N", "1", "--out", str(tmp_path)])
    assert code == EXIT_CONFIG
    assert "nonempty q list" in capsys.readouterr().err


def test_sweep_success_and_csv_contract(tmp_path):
    out = tmp_path / "sweep"
    code = main([
        "sweep", "--p", "2", "--N", "1", "--q", "20,40",
        "--n", "256", "--out", str(out),
    ])
    assert code == EXIT_OK
    with open(out / "sweep.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["q", "c_q", "sup_dist_G", "w1p_dist_G", "h_q_G",
                       "u_at_0", "u_at_1"]
    assert len(rows) == 3
    payload = _read_json(out / "sweep.json")
    assert [row["status"] for row in payload["rows"]] == ["ok", "ok"]
    assert abs(payload["c_infty"] - math.tanh(1.0)) <= 1e-8
    gaps = [abs(row["c_q"] - payload["c_infty"]) for row in payload["rows"]]
    assert gaps[1] < gaps[0]
    assert (out / "sweep.png").stat().st_size > 0


def test_sweep_flags_failed_rows(tmp_path, capsys):
    out = tmp_path / "sweep"
    code = main([
        "sweep", "--p", "2", "--N", "1", "--q", "10,20",
        "--n", "256", "--out", str(out),
    ])
    assert code == EXIT_SOLVER
    assert "q=10 failed: NoSignChange" in capsys.readouterr().err
    payload = _read_json(out / "sweep.json")
    statuses = {row["q"]: row["status"] for row in payload["rows"]}
    assert statuses[10.0] == "NoSignChange"
    assert statuses[20.0] == "ok"


def test_limit_outputs(tmp_path):
    out = tmp_path / "lim"
    code = main(["limit", "--p", "2", "--N", "1", "--n", "64", "--out", str(out)])
    assert code == EXIT_OK
    payload = _read_json(out / "limit.json")
    assert abs(payload["G0"] - 1.0 / math.cosh(1.0)) <= 1e-8
    assert abs(payload["c_infty"] - math.tanh(1.0)) <= 1e-8
    assert (out / "limit_profile.csv").exists()
    assert (out / "limit_profile.png").stat().st_size > 0


def test_verify_battery_passes(tmp_path, capsys):
    out = tmp_path / "ver"
    code = main(["verify", "--n", "64", "--out", str(out)])
    assert code == EXIT_OK
    report = _read_json(out / "verify_report.json")
    assert report["all_passed"] is True
    assert "[PASS]" in capsys.readouterr().out


def test_verify_battery_catches_mutation(tmp_path, capsys):
    out = tmp_path / "ver"
    code = main([
        "verify", "--n", "64", "--mutate", "sign-flip", "--out", str(out),
    ])
    assert code == EXIT_CERTIFICATE
    err = capsys.readouterr().err
    assert "truncation-monotone" in err
    report = _read_json(out / "verify_report.json")
    assert report["all_passed"] is False
    assert report["mutation"] == "sign-flip"


def test_config_file_with_flag_override(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("q=12\nn_cells=64\n")
    out = tmp_path / "out"
    code = main([
        "solve", "--config", str(cfg_file), "--q", "14",
        "--p", "3", "--N", "1", "--out", str(out),
    ])
    assert code == EXIT_OK
    payload = _read_json(out / "solve_result.json")
    assert payload["q"] == 14.0  # the flag beats the file
    assert payload["n_cells"] == 64  # the file beats the default


def test_config_rejects_unknown_key(tmp_path, capsys):
    cfg_file = tmp_path / "bad.cfg"
    cfg_file.write_text("qq=12\n")
    code = main(["solve", "--config", str(cfg_file), "--out", str(tmp_path)])
    assert code == EXIT_CONFIG
    assert "unknown key" in capsys.readouterr().err


def test_config_round_trip():
    cfg = RunConfig(command="sweep", p=2.0, q_list=(10.0, 20.0), N=2,
                    n_cells=256, s0="3.5", ell=4.0, seed=7)
    parsed = parse_config(serialize_config(cfg))
    rebuilt = RunConfig(**parsed)
    assert rebuilt == cfg


def test_missing_subcommand_is_config_error():
    assert main([]) == EXIT_CONFIG


def test_help_exits_clean(capsys):
    assert main(["--help"]) == EXIT_OK
    assert "solve" in capsys.readouterr().out
