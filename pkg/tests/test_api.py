import json

import pytest
from fastapi.testclient import TestClient

from tests.conftest import small_scene
from volumetrack.config import get_settings
from volumetrack.main import app
from volumetrack.routes import runs
from volumetrack.routes.runs import clear_runs


@pytest.fixture
def client(tmp_path, monkeypatch):
    monkeypatch.setenv("VOLUMETRACK_RUNS_DIR", str(tmp_path / "runs"))
    get_settings.cache_clear()
    clear_runs()
    with TestClient(app) as c:
        yield c
    clear_runs()
    get_settings.cache_clear()


def test_health(client):
    response = client.get("/api/health")
    assert response.status_code == 200
    assert response.json()["status"] == "ok"
    assert response.json()["service"] == "volumetrack"


def test_run_lifecycle(client, tmp_path):
    script = tmp_path / "scene.json"
    script.write_text(json.dumps(small_scene(frames=2)))
    definition = {"stages": [{"key": "gen", "type": "generate", "params": {"script": str(script), "out_dir": str(tmp_path / "ds")}}]}

    response = client.post("/api/runs", json=definition)
    assert response.status_code == 202
    run_id = response.json()["id"]

    # background tasks finish before the test client returns
    run = client.get(f"/api/runs/{run_id}").json()
    assert run["status"] == "completed"
    assert run["output_payload"]["frames"] == 2
    assert run["stage_runs"][0]["key"] == "gen"

    persisted = json.loads((tmp_path / "runs" / f"{run_id}.json").read_text())
    assert persisted["status"] == "completed"

    listed = client.get("/api/runs", params={"status": "completed"}).json()
    assert [r["id"] for r in listed] == [run_id]
    assert client.get("/api/runs", params={"status": "failed"}).json() == []


def test_failed_run_keeps_exit_code(client):
    response = client.post("/api/runs", json={"stages": [{"key": "x", "type": "render"}]})
    run = client.get(f"/api/runs/{response.json()['id']}").json()
    assert run["status"] == "failed"
    assert run["exit_code"] == 2


def test_invalid_definition_rejected(client):
    assert client.post("/api/runs", json={"stages": []}).status_code == 422


def test_unknown_run(client):
    response = client.get("/api/runs/doesnotexist")
    assert response.status_code == 404
    assert response.json()["detail"] == "Run not found"


def test_finished_runs_evicted_but_still_served(client, monkeypatch):
    monkeypatch.setattr(runs, "MAX_RUNS", 2)
    ids = [client.post("/api/runs", json={"stages": [{"key": "x", "type": "render"}]}).json()["id"] for _ in range(3)]
    listed = {r["id"] for r in client.get("/api/runs").json()}
    assert listed == set(ids[1:])
    evicted = client.get(f"/api/runs/{ids[0]}")
    assert evicted.status_code == 200
    assert evicted.json()["status"] == "failed"
