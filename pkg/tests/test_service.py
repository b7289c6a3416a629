"""HTTP API contract, exercised through the test client with the mock
backend (no network, no model)."""

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from angioforge.config import BackendConfig
from angioforge.raster import encode_png
from angioforge.service import create_app


@pytest.fixture
def client(tmp_path):
    app = create_app(tmp_path / "store",
                     backend_config=BackendConfig(kind="mock"))
    with TestClient(app) as c:
        yield c


@pytest.fixture
def local_client(tmp_path, phantom_png):
    app = create_app(tmp_path / "store-local",
                     backend_config=BackendConfig(kind="local"))
    with TestClient(app) as c:
        yield c


def _upload(client, png, config=None):
    files = {"image": ("angiogram.png", png, "image/png")}
    data = {"config": json.dumps(config)} if config else {}
    return client.post("/sessions", files=files, data=data)


def test_healthz(client):
    resp = client.get("/healthz")
    assert resp.status_code == 200
    body = resp.json()
    assert body["backend"] == "mock"
    assert body["status"] == "Ready"


def test_create_session_201(client, phantom_png):
    resp = _upload(client, phantom_png)
    assert resp.status_code == 201
    body = resp.json()
    assert body["status"] == "InProgress"
    assert body["cursor"] == 1
    assert len(body["steps"]) == 16
    assert all(s["state"] == "untouched" for s in body["steps"])


def test_create_session_bad_image_400(client):
    resp = _upload(client, b"junk bytes")
    assert resp.status_code == 400


def test_unknown_session_404(client):
    assert client.get("/sessions/nope").status_code == 404
    assert client.post("/sessions/nope/advance").status_code == 404


def test_full_scripted_exercise(client, phantom_png):
    """Create, drive all 16 steps with one regenerate, download outputs."""
    session_id = _upload(client, phantom_png).json()["id"]

    for step in range(1, 17):
        rec = client.post(f"/sessions/{session_id}/advance")
        assert rec.status_code == 200, rec.text
        body = rec.json()
        assert body["step_index"] == step
        iteration = body["iteration"]

        if step == 5:
            # operator dislikes the attempt: reject, then regenerate
            rej = client.post(
                f"/sessions/{session_id}/steps/5/iterations/{iteration}/reject")
            assert rej.status_code == 200
            reg = client.post(
                f"/sessions/{session_id}/steps/5/regenerate",
                json={"prompt": "segment with a stricter threshold"})
            assert reg.status_code == 200
            body = reg.json()
            assert body["iteration"] == iteration + 1
            assert body["prompt_used"] == "segment with a stricter threshold"
            iteration = body["iteration"]

        acc = client.post(
            f"/sessions/{session_id}/steps/{step}/iterations/{iteration}/accept")
        assert acc.status_code == 200
        assert acc.json()["cursor"] == step + 1

    summary = client.get(f"/sessions/{session_id}").json()
    assert summary["status"] == "Complete"
    states = [s["state"] for s in summary["steps"]]
    assert states == ["accepted"] * 16
    assert summary["steps"][4]["iterations"] == 2

    history = client.get(f"/sessions/{session_id}/history").json()["records"]
    assert len(history) == 17  # 16 accepted + 1 rejected

    # artifact download round-trips
    output_hash = history[0]["output_hash"]
    art = client.get(f"/sessions/{session_id}/artifacts/{output_hash}")
    assert art.status_code == 200
    assert art.headers["content-type"] == "image/png"
    assert art.content[:8] == b"\x89PNG\r\n\x1a\n"


def test_outputs_gated_until_complete(local_client, phantom_png):
    session_id = _upload(local_client, phantom_png).json()["id"]
    resp = local_client.get(f"/sessions/{session_id}/outputs/model.stl")
    assert resp.status_code == 404

    for step in range(1, 17):
        it = local_client.post(
            f"/sessions/{session_id}/advance").json()["iteration"]
        local_client.post(
            f"/sessions/{session_id}/steps/{step}/iterations/{it}/accept")

    for name, magic in (("projection.png", b"\x89PNG"),
                        ("flow.png", b"\x89PNG"),
                        ("model.stl", None),
                        ("report.json", None)):
        resp = local_client.get(f"/sessions/{session_id}/outputs/{name}")
        assert resp.status_code == 200, name
        if magic:
            assert resp.content[:4] == magic
    report = local_client.get(
        f"/sessions/{session_id}/outputs/report.json").json()
    assert "stagnation" in report and "mesh_validation" in report
    assert report["mesh_validation"]["watertight"] is True

    assert local_client.get(
        f"/sessions/{session_id}/outputs/evil.exe").status_code == 404


def test_accept_is_idempotent(client, phantom_png):
    session_id = _upload(client, phantom_png).json()["id"]
    it = client.post(f"/sessions/{session_id}/advance").json()["iteration"]
    url = f"/sessions/{session_id}/steps/1/iterations/{it}/accept"
    first = client.post(url)
    second = client.post(url)
    assert first.status_code == second.status_code == 200
    assert first.json()["cursor"] == second.json()["cursor"] == 2
    # repeating accept added no history
    n = len(client.get(f"/sessions/{session_id}/history").json()["records"])
    assert n == 1


def test_conflicting_decision_409(client, phantom_png):
    session_id = _upload(client, phantom_png).json()["id"]
    it = client.post(f"/sessions/{session_id}/advance").json()["iteration"]
    client.post(f"/sessions/{session_id}/steps/1/iterations/{it}/accept")
    resp = client.post(f"/sessions/{session_id}/steps/1/iterations/{it}/reject")
    assert resp.status_code == 409


def test_regenerate_wrong_step_409(client, phantom_png):
    session_id = _upload(client, phantom_png).json()["id"]
    it = client.post(f"/sessions/{session_id}/advance").json()["iteration"]
    client.post(f"/sessions/{session_id}/steps/1/iterations/{it}/accept")
    resp = client.post(f"/sessions/{session_id}/steps/1/regenerate",
                       json={"prompt": "go back"})
    assert resp.status_code == 409


def test_advance_past_completion_409(client, phantom_png):
    session_id = _upload(client, phantom_png).json()["id"]
    for step in range(1, 17):
        it = client.post(f"/sessions/{session_id}/advance").json()["iteration"]
        client.post(
            f"/sessions/{session_id}/steps/{step}/iterations/{it}/accept")
    assert client.post(f"/sessions/{session_id}/advance").status_code == 409


def test_config_overrides_applied(client):
    png = encode_png(np.full((64, 64), 128, dtype=np.uint8))
    resp = _upload(client, png, config={"n_sides": 24, "pixel_pitch": 0.5})
    assert resp.status_code == 201
    body = resp.json()
    assert body["config"]["n_sides"] == 24
    assert body["config"]["pixel_pitch"] == 0.5


def test_bad_config_400(client, phantom_png):
    files = {"image": ("a.png", phantom_png, "image/png")}
    resp = client.post("/sessions", files=files, data={"config": "{not json"})
    assert resp.status_code == 400


def test_list_sessions(client, phantom_png):
    a = _upload(client, phantom_png).json()["id"]
    b = _upload(client, phantom_png).json()["id"]
    listed = client.get("/sessions").json()["sessions"]
    assert a in listed and b in listed


def test_unknown_artifact_404(client, phantom_png):
    session_id = _upload(client, phantom_png).json()["id"]
    resp = client.get(f"/sessions/{session_id}/artifacts/{'0' * 64}")
    assert resp.status_code == 404


def test_sessions_persist_across_app_instances(tmp_path, phantom_png):
    root = tmp_path / "store"
    cfg = BackendConfig(kind="mock")
    with TestClient(create_app(root, backend_config=cfg)) as c1:
        session_id = _upload(c1, phantom_png).json()["id"]
        it = c1.post(f"/sessions/{session_id}/advance").json()["iteration"]
        c1.post(f"/sessions/{session_id}/steps/1/iterations/{it}/accept")
    with TestClient(create_app(root, backend_config=cfg)) as c2:
        body = c2.get(f"/sessions/{session_id}").json()
        assert body["cursor"] == 2
        assert body["steps"][0]["state"] == "accepted"
