"""Command line behavior, in process and against a stubbed server."""

import json
import os

import pytest
import yaml
from click.testing import CliRunner
from fastapi.testclient import TestClient

import swnet.cli as cli_mod
from swnet.cli import main
from swnet.service import create_app

CFG = {
    "seed": 8,
    "mode": "swn",
    "budget_fraction": 0.75,
    "dataset": {"kind": "spirals", "classes": 3, "n": 120, "noise": 0.1},
    "ensemble": {"members": 2, "width": 10, "depth": 2},
    "train": {"epochs": 3, "batch_size": 32, "lr": 0.05},
    "search": {"warmup_epochs": 1},
    "refine": {"epoch": 2},
}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli")
    with open(path / "cfg.yaml", "w") as fh:
        yaml.safe_dump(CFG, fh)
    return path


@pytest.fixture(scope="module")
def run_result(workdir):
    runner = CliRunner()
    result = runner.invoke(
        main,
        [
            "run",
            "-c", str(workdir / "cfg.yaml"),
            "--out-root", str(workdir / "runs"),
        ],
    )
    assert result.exit_code == 0, result.output
    return json.loads(result.output)


def invoke(*args, env=None):
    return CliRunner().invoke(main, list(args), env=env)


def test_run_summary_output(run_result):
    assert run_result["mode"] == "swn"
    assert run_result["seed"] == 8
    assert set(run_result["test"]) == {"top1", "nll", "ece"}
    assert os.path.exists(os.path.join(run_result["run_dir"], "report.json"))


def test_run_verbose_prints_full_report(workdir):
    result = invoke(
        "run",
        "-c", str(workdir / "cfg.yaml"),
        "--out-root", str(workdir / "runs"),
        env={"SWNET_VERBOSE": "1"},
    )
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert "budget" in report and "anytime" in report  # the whole report


def test_run_overrides(workdir):
    result = invoke(
        "run",
        "-c", str(workdir / "cfg.yaml"),
        "-o", "mode=no_refine",
        "-o", "seed=9",
        "--out-root", str(workdir / "runs2"),
    )
    assert result.exit_code == 0, result.output
    out = json.loads(result.output)
    assert out["mode"] == "no_refine" and out["seed"] == 9


def test_run_without_config_uses_defaults_but_fails_fast(workdir):
    # the default config is valid but this architecture needs a budget
    # above the feasible floor, so pin a tiny run via overrides alone
    result = invoke(
        "run",
        "-o", "dataset.n=120",
        "-o", "ensemble.members=2",
        "-o", "ensemble.width=10",
        "-o", "ensemble.depth=2",
        "-o", "budget_fraction=0.75",
        "-o", "train.epochs=3",
        "-o", "refine.epoch=2",
        "--out-root", str(workdir / "runs3"),
    )
    assert result.exit_code == 0, result.output


def test_search_only_command(workdir):
    result = invoke(
        "search-only",
        "-c", str(workdir / "cfg.yaml"),
        "--out-root", str(workdir / "search"),
    )
    assert result.exit_code == 0, result.output
    out = json.loads(result.output)
    assert out["search"]["groups"]
    assert os.path.exists(os.path.join(out["run_dir"], "similarity.csv"))


def test_eval_command(run_result):
    ckpt = os.path.join(run_result["run_dir"], "model.swck")
    result = invoke("eval", ckpt, "--split", "val")
    assert result.exit_code == 0, result.output
    out = json.loads(result.output)
    assert out["split"] == "val" and "ensemble" in out


def test_anytime_command(run_result):
    ckpt = os.path.join(run_result["run_dir"], "model.swck")
    result = invoke("anytime", ckpt, "--budget", "1000000")
    assert result.exit_code == 0, result.output
    out = json.loads(result.output)
    assert len(out["entries"]) == 3
    assert out["selected"]["cost"] <= 1000000

    result = invoke("anytime", ckpt)
    assert result.exit_code == 0
    assert "selected" not in json.loads(result.output)


def test_interpolate_command(run_result):
    ckpt = os.path.join(run_result["run_dir"], "model.swck")
    result = invoke("interpolate", ckpt, "--steps", "3")
    assert result.exit_code == 0, result.output
    rows = json.loads(result.output)["rows"]
    assert [r["lam"] for r in rows] == [0.0, 0.5, 1.0]


def test_predict_command(run_result):
    ckpt = os.path.join(run_result["run_dir"], "model.swck")
    result = invoke("predict", ckpt, "--inputs", "[[0.3, -0.2]]")
    assert result.exit_code == 0, result.output
    out = json.loads(result.output)
    assert len(out["probs"]) == 1 and out["classes"] == 3

    result = invoke("predict", ckpt, "--inputs", "not json")
    assert result.exit_code != 0
    assert "bad JSON" in result.output


def test_cli_errors_are_clean(workdir):
    result = invoke(
        "run",
        "-c", str(workdir / "cfg.yaml"),
        "-o", "budget_fraction=0.01",
        "--out-root", str(workdir / "bad"),
    )
    assert result.exit_code != 0
    assert "minimum feasible budget" in result.output
    assert "Traceback" not in result.output

    result = invoke("run", "-o", "train.lr")
    assert result.exit_code != 0
    assert "key.path=value" in result.output

    result = invoke("eval", "/does/not/exist.swck")
    assert result.exit_code != 0


# ---- server mode ------------------------------------------------------------


@pytest.fixture()
def stub_server(monkeypatch):
    """Route the CLI's HTTP posts into an in-process test client."""
    test_client = TestClient(create_app())

    def fake_post(url, json=None, timeout=None):
        path = url.split("http://stub", 1)[1]
        return test_client.post(path, json=json)

    monkeypatch.setattr(cli_mod.httpx, "post", fake_post)
    return "http://stub"


def test_server_mode_run_and_eval(workdir, stub_server, run_result):
    result = invoke(
        "run",
        "-c", str(workdir / "cfg.yaml"),
        "--out-root", str(workdir / "srv"),
        "--server", stub_server,
    )
    assert result.exit_code == 0, result.output
    out = json.loads(result.output)
    assert out["mode"] == "swn"

    ckpt = os.path.join(run_result["run_dir"], "model.swck")
    result = invoke("eval", ckpt, "--server", stub_server)
    assert result.exit_code == 0, result.output
    assert json.loads(result.output)["split"] == "test"


def test_server_mode_error_surface(run_result, stub_server):
    ckpt = os.path.join(run_result["run_dir"], "model.swck")
    result = invoke("anytime", ckpt, "--budget", "1", "--server", stub_server)
    assert result.exit_code != 0
    assert "server returned 422" in result.output
    assert "fits no subset" in result.output
