import json

import pandas as pd
import pytest

from cli import EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_ENGINE, EXIT_OK, build_parser, main
from reports import experiments
from reports.config import SEED_ENV
from reports.writer import reproducible_payload

LINEAR_TORUS = """
[experiment]
kind = "bochner"
name = "linear-torus"
seed = 0
plots = false

[manifold]
kind = "flat_torus"
dim = 2

[map]
kind = "linear_torus"
matrix = [[1.0, 0.0], [0.0, 2.0]]

[bochner]
K = 0.0
resolution = 8
"""

SPHERE_WRONG_BOUND = """
[experiment]
kind = "curvature"
name = "unit-sphere"
seed = 1

[manifold]
kind = "round_sphere"
dim = 2
radius = 1.0

[curvature]
samples = 4
planes_per_point = 3
K = 0.5
"""


def test_parser_has_one_command_per_runner():
    args = build_parser().parse_args(["flow", "--config", "x.toml", "--seed", "3", "--tol-scale", "2",
                                      "--log-level", "DEBUG"])
    assert (args.command, args.seed, args.tol_scale, args.log_level) == ("flow", 3, 2.0, "DEBUG")
    with pytest.raises(SystemExit):
        build_parser().parse_args(["bochner"])


def test_passing_run_writes_report(write_config, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["bochner", "--config", str(write_config(LINEAR_TORUS)), "--out", str(out)])
    assert code == EXIT_OK
    assert "checks passed" in capsys.readouterr().out

    payload = json.loads((out / "report.json").read_text())
    assert payload["passed"] is True
    assert payload["command"] == "bochner"
    assert {c["name"] for c in payload["checks"]} == {"bochner.harmonic", "bochner.residual"}
    assert "bochner.residual" in payload["tolerances"]
    assert len(pd.read_csv(out / "bochner.csv")) == 64
    assert pd.read_csv(out / "checks.csv")["passed"].all()


def test_failed_check_exit_code(write_config, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["curvature", "--config", str(write_config(SPHERE_WRONG_BOUND)), "--out", str(out)])
    assert code == EXIT_CHECK_FAILED
    assert "curvature.sec_upper_bound" in capsys.readouterr().out
    payload = json.loads((out / "report.json").read_text())
    assert payload["passed"] is False
    assert payload["results"]["sec_bound"]["passed"] is False


def test_seed_and_tol_scale_recorded(write_config, tmp_path):
    out = tmp_path / "out"
    main(["bochner", "--config", str(write_config(LINEAR_TORUS)), "--out", str(out),
          "--seed", "5", "--tol-scale", "10"])
    payload = json.loads((out / "report.json").read_text())
    assert payload["config"]["seed"] == 5
    assert payload["config"]["tol_scale"] == 10.0
    assert payload["tolerances"]["bochner.residual"] == pytest.approx(1e-6)


def test_runs_are_reproducible(write_config, tmp_path):
    config = str(write_config(SPHERE_WRONG_BOUND))
    main(["curvature", "--config", config, "--out", str(tmp_path / "a")])
    main(["curvature", "--config", config, "--out", str(tmp_path / "b")])
    first = reproducible_payload((tmp_path / "a" / "report.json").read_text())
    second = reproducible_payload((tmp_path / "b" / "report.json").read_text())
    assert first == second
    assert (tmp_path / "a" / "curvature.csv").read_text() == (tmp_path / "b" / "curvature.csv").read_text()


@pytest.mark.parametrize(
    "text,command",
    [
        (LINEAR_TORUS.replace("resolution = 8", "resolution = 8\nresolutoin = 4"), "bochner"),
        (LINEAR_TORUS, "flow"),
        ("[experiment\n", "bochner"),
    ],
)
def test_config_errors_exit_2(write_config, tmp_path, capsys, text, command):
    out = tmp_path / "out"
    code = main([command, "--config", str(write_config(text)), "--out", str(out)])
    assert code == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert not (out / "report.json").exists()


def test_missing_config_exit_2(tmp_path, capsys):
    assert main(["lemma", "--config", str(tmp_path / "absent.toml")]) == EXIT_CONFIG
    assert "config file not found" in capsys.readouterr().err


def test_runner_config_error_exit_2(write_config, capsys):
    text = '[experiment]\nkind = "lemma"\n\n[lemma]\nm = 1\nn = 2\n'
    assert main(["lemma", "--config", str(write_config(text))]) == EXIT_CONFIG
    assert "lemma.m" in capsys.readouterr().err


def test_engine_error_writes_partial_report(write_config, tmp_path, monkeypatch, capsys):
    def broken(config):
        raise RuntimeError("grid exploded")

    monkeypatch.setitem(experiments.RUNNERS, "bochner", broken)
    out = tmp_path / "out"
    code = main(["bochner", "--config", str(write_config(LINEAR_TORUS)), "--out", str(out)])
    assert code == EXIT_ENGINE
    assert "grid exploded" in capsys.readouterr().err
    payload = json.loads((out / "report.json").read_text())
    assert payload["status"] == "error"
    assert payload["error"] == "RuntimeError: grid exploded"
    assert payload["checks"] == []


def test_environment_seed_reaches_report(write_config, tmp_path, monkeypatch):
    monkeypatch.setenv(SEED_ENV, "17")
    out = tmp_path / "out"
    main(["bochner", "--config", str(write_config(LINEAR_TORUS)), "--out", str(out)])
    assert json.loads((out / "report.json").read_text())["config"]["seed"] == 17
