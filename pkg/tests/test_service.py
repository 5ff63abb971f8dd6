"""HTTP endpoints: happy paths and error mapping."""

import os

import pytest
from fastapi.testclient import TestClient

from swnet.service import create_app

CFG = {
    "seed": 2,
    "mode": "swn",
    "budget_fraction": 0.75,
    "dataset": {"kind": "spirals", "classes": 3, "n": 120, "noise": 0.1},
    "ensemble": {"members": 2, "width": 10, "depth": 2},
    "train": {"epochs": 3, "batch_size": 32, "lr": 0.05},
    "search": {"warmup_epochs": 1},
    "refine": {"epoch": 2},
}


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


@pytest.fixture(scope="module")
def run_payload(client, tmp_path_factory):
    out_root = str(tmp_path_factory.mktemp("runs"))
    resp = client.post("/run", json={"config": CFG, "out_root": out_root})
    assert resp.status_code == 200, resp.text
    return resp.json()


def test_health(client):
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert len(body["modes"]) == 7
    assert "swn" in body["modes"] and "no_refine" in body["modes"]


def test_run_returns_report_and_artifacts(run_payload):
    report = run_payload["report"]
    run_dir = run_payload["run_dir"]
    assert report["mode"] == "swn"
    assert report["budget"]["committed"] <= report["budget"]["budget"]
    assert os.path.exists(os.path.join(run_dir, "model.swck"))
    assert os.path.exists(os.path.join(run_dir, "report.json"))


def test_run_accepts_overrides(client, tmp_path):
    resp = client.post(
        "/run",
        json={
            "config": CFG,
            "overrides": ["mode=no_refine", "seed=3"],
            "out_root": str(tmp_path),
        },
    )
    assert resp.status_code == 200
    report = resp.json()["report"]
    assert report["mode"] == "no_refine" and report["seed"] == 3


def test_search_only_endpoint(client, tmp_path):
    resp = client.post("/search-only", json={"config": CFG, "out_root": str(tmp_path)})
    assert resp.status_code == 200
    body = resp.json()
    assert body["summary"]["search"]["groups"]
    assert os.path.exists(os.path.join(body["run_dir"], "search.json"))


def test_eval_endpoint(client, run_payload):
    ckpt = os.path.join(run_payload["run_dir"], "model.swck")
    resp = client.post("/eval", json={"checkpoint": ckpt, "split": "test"})
    assert resp.status_code == 200
    result = resp.json()["result"]
    assert result["ensemble"] == run_payload["report"]["eval"]["ensemble"]


def test_anytime_endpoint(client, run_payload):
    ckpt = os.path.join(run_payload["run_dir"], "model.swck")
    resp = client.post("/anytime", json={"checkpoint": ckpt, "budget": 10**9})
    assert resp.status_code == 200
    body = resp.json()
    assert len(body["entries"]) == 3  # two members: {0}, {1}, {0, 1}
    assert body["selected"] is not None

    resp = client.post("/anytime", json={"checkpoint": ckpt})
    assert resp.status_code == 200
    assert resp.json()["selected"] is None


def test_interpolate_endpoint(client, run_payload):
    ckpt = os.path.join(run_payload["run_dir"], "model.swck")
    resp = client.post(
        "/interpolate",
        json={"checkpoint": ckpt, "member_a": 0, "member_b": 1, "steps": 3},
    )
    assert resp.status_code == 200
    rows = resp.json()["rows"]
    assert [r["lam"] for r in rows] == [0.0, 0.5, 1.0]


def test_predict_endpoint(client, run_payload):
    ckpt = os.path.join(run_payload["run_dir"], "model.swck")
    resp = client.post(
        "/predict",
        json={"checkpoint": ckpt, "inputs": [[0.2, -0.4], [0.9, 0.1]]},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["classes"] == 3
    assert len(body["probs"]) == 2
    for row in body["probs"]:
        assert abs(sum(row) - 1.0) < 1e-5

    resp = client.post(
        "/predict",
        json={"checkpoint": ckpt, "inputs": [[0.2, -0.4]], "member_ids": [1]},
    )
    assert resp.status_code == 200


# ---- error mapping ----------------------------------------------------------


def test_invalid_config_maps_to_422(client, tmp_path):
    resp = client.post(
        "/run",
        json={"config": {"train": {"bogus": 1}}, "out_root": str(tmp_path)},
    )
    assert resp.status_code == 422
    assert "train.bogus" in resp.json()["detail"]


def test_infeasible_budget_maps_to_422(client, tmp_path):
    cfg = dict(CFG, budget_fraction=0.01)
    resp = client.post("/run", json={"config": cfg, "out_root": str(tmp_path)})
    assert resp.status_code == 422
    detail = resp.json()["detail"]
    assert "stage search" in detail and "minimum feasible budget" in detail


def test_missing_checkpoint_maps_to_422(client):
    resp = client.post("/eval", json={"checkpoint": "/does/not/exist.swck"})
    assert resp.status_code == 422


def test_bad_budget_maps_to_422(client, run_payload):
    ckpt = os.path.join(run_payload["run_dir"], "model.swck")
    resp = client.post("/anytime", json={"checkpoint": ckpt, "budget": 1})
    assert resp.status_code == 422
    assert "fits no subset" in resp.json()["detail"]


def test_unknown_request_fields_rejected(client):
    resp = client.post("/eval", json={"checkpoint": "x", "oops": True})
    assert resp.status_code == 422


def test_bad_predict_inputs(client, run_payload):
    ckpt = os.path.join(run_payload["run_dir"], "model.swck")
    resp = client.post(
        "/predict", json={"checkpoint": ckpt, "inputs": [[0.1, 0.2, 0.3]]}
    )
    assert resp.status_code == 422  # three features on a 2-d model
