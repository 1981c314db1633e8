import json
import os

import numpy as np
import pytest

from saddlenet.harness import (PRESETS, ConfigError, cmd_solve, load_config,
                               main, resolve_config)


def solve_args(preset, out, extra=()):
    return ["solve", "--preset", preset, "--out", out] + list(extra)


def test_load_config_reports_json_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"preset": "example1",}')
    with pytest.raises(ConfigError) as err:
        load_config(str(path))
    assert "line" in str(err.value) and "column" in str(err.value)


def test_resolve_config_rejects_unknown_keys():
    with pytest.raises(ConfigError) as err:
        resolve_config({"preset": "example1", "stepsize": 0.1})
    assert "stepsize" in str(err.value)


def test_resolve_config_requires_known_preset():
    with pytest.raises(ConfigError):
        resolve_config({})
    with pytest.raises(ConfigError) as err:
        resolve_config({"preset": "nope"})
    assert "nope" in str(err.value)


def test_resolve_config_validates_methods():
    with pytest.raises(ConfigError):
        resolve_config({"preset": "example1", "methods": []})
    with pytest.raises(ConfigError):
        resolve_config({"preset": "example1", "methods": ["NEWTON"]})
    cfg = resolve_config({"preset": "example1", "methods": ["ogda", "eg"]})
    assert cfg["methods"] == ["OGDA", "EG"]


def test_resolve_config_rejects_gda_on_network_presets():
    with pytest.raises(ConfigError) as err:
        resolve_config({"preset": "consensus5", "methods": ["GDA"]})
    assert "GDA" in str(err.value)


def test_cli_error_exit_code(capsys):
    code = main(["solve", "--preset", "nope"])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_solve_writes_artifacts(tmp_path, capsys):
    out = str(tmp_path / "run")
    code = main(solve_args("quadratic-saddle", out,
                           ["--iters", "50", "--method", "OGDA"]))
    assert code == 0
    names = sorted(os.listdir(out))
    assert "config.json" in names
    assert "summary.json" in names
    assert "quadratic-saddle-OGDA.csv" in names
    assert "quadratic-saddle-reference.json" in names
    summary = json.loads(open(os.path.join(out, "summary.json")).read())
    runs = summary["runs"]
    assert len(runs) == 1
    entry = runs[0]
    for key in ("method", "alpha", "iterations", "gradient_calls",
                "wall_time_s", "final_vi_residual"):
        assert key in entry
    assert entry["method"] == "OGDA"
    stdout = capsys.readouterr().out
    assert "OGDA" in stdout


def test_solve_csv_has_expected_columns(tmp_path):
    out = str(tmp_path / "run")
    main(solve_args("quadratic-saddle", out,
                    ["--iters", "20", "--method", "OGDA"]))
    path = os.path.join(out, "quadratic-saddle-OGDA.csv")
    header = open(path).readline().strip().split(",")
    assert header[:3] == ["iter", "f_value", "vi_residual"]
    assert "ergodic_gap" in header
    assert "delta_k" in header


def test_solve_network_preset_csv(tmp_path):
    out = str(tmp_path / "run")
    code = main(solve_args("consensus5", out,
                           ["--iters", "100", "--method", "EG",
                            "--stop-tol", "0"]))
    assert code == 0
    path = os.path.join(out, "consensus5-EG.csv")
    header = open(path).readline().strip()
    assert header == "iter,agent_id,x0,v0,consensus_residual,objective_sum"


def test_solve_is_bitwise_deterministic(tmp_path):
    out1 = str(tmp_path / "a")
    out2 = str(tmp_path / "b")
    extra = ["--iters", "200", "--method", "OGDA", "--method", "EG"]
    assert main(solve_args("example1", out1, extra)) == 0
    assert main(solve_args("example1", out2, extra)) == 0
    for name in ("example1-OGDA.csv", "example1-EG.csv"):
        b1 = open(os.path.join(out1, name), "rb").read()
        b2 = open(os.path.join(out2, name), "rb").read()
        assert b1 == b2


def test_solve_seed_changes_trace(tmp_path):
    out1 = str(tmp_path / "a")
    out2 = str(tmp_path / "b")
    extra = ["--iters", "50", "--method", "OGDA"]
    main(solve_args("example1", out1, extra))
    main(solve_args("example1", out2, extra + ["--seed", "1"]))
    b1 = open(os.path.join(out1, "example1-OGDA.csv"), "rb").read()
    b2 = open(os.path.join(out2, "example1-OGDA.csv"), "rb").read()
    assert b1 != b2


def test_config_file_equivalent_to_flags(tmp_path):
    cfg = {"preset": "quadratic-saddle", "methods": ["OGDA"], "iters": 40,
           "out": str(tmp_path / "c")}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["solve", "--config", str(path)]) == 0
    flag_out = str(tmp_path / "d")
    main(solve_args("quadratic-saddle", flag_out, ["--iters", "40",
                                                   "--method", "OGDA"]))
    b1 = open(os.path.join(cfg["out"], "quadratic-saddle-OGDA.csv"), "rb").read()
    b2 = open(os.path.join(flag_out, "quadratic-saddle-OGDA.csv"), "rb").read()
    assert b1 == b2


def test_list_presets_names_everything(capsys):
    assert main(["list-presets"]) == 0
    out = capsys.readouterr().out
    for name in PRESETS:
        assert name in out


def test_verify_passes_on_fast_preset(tmp_path, capsys):
    code = main(["verify", "--preset", "quadratic-saddle",
                 "--out", str(tmp_path / "v")])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"]
    names = [c["check"] for c in report["checks"]]
    assert "monotonicity" in names
    assert "rate_certificate_OGDA" in names
    for check in report["checks"]:
        assert check["passed"], check["check"]


def test_verify_fails_on_corrupted_gradient(tmp_path, capsys):
    code = main(["verify", "--preset", "consensus5-badgrad",
                 "--out", str(tmp_path / "v")])
    assert code == 3
    report = json.loads(capsys.readouterr().out)
    assert not report["passed"]
    failed = [c["check"] for c in report["checks"] if not c["passed"]]
    assert failed == ["gradient_finite_diff"]


def test_verify_report_lists_margins(tmp_path, capsys):
    code = main(["verify", "--preset", "quadratic-saddle",
                 "--out", str(tmp_path / "v")])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    for check in report["checks"]:
        assert "margin" in check or "measured" in check


def test_solve_rejects_bad_alpha(tmp_path, capsys):
    code = main(solve_args("example1", str(tmp_path / "r"),
                           ["--alpha", "0.5", "--method", "OGDA"]))
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_cmd_solve_accepts_resolved_config(tmp_path):
    cfg = resolve_config({"preset": "quadratic-saddle", "iters": 10,
                          "out": str(tmp_path / "direct")})
    assert cmd_solve(cfg) == 0
    assert os.path.exists(os.path.join(cfg["out"], "summary.json"))


def test_preset_table_is_complete():
    for name, preset in PRESETS.items():
        assert preset["kind"] in ("saddle", "consensus", "allocation")
        assert callable(preset["build"])
        assert preset["methods"]
        assert "description" in preset
