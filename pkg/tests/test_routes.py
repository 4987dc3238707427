import time

import vgswarm.extensions as extensions
from vgswarm.core.scenario import PRESETS, build_preset, scenario_to_dict
from vgswarm.routes import experiments


def test_health(client):
    res = client.get("/health")
    assert res.status_code == 200
    assert res.get_json() == {"status": "ok", "presets": len(PRESETS)}


def test_list_presets(client):
    res = client.get("/api/presets")
    assert [p["name"] for p in res.get_json()] == list(PRESETS)


def test_run_preset_is_capped(client):
    res = client.post("/api/runs", json={"preset": "unreachable", "max_ticks": 500})
    assert res.status_code == 200
    body = res.get_json()
    assert body["ticks"] == 10
    assert body["success_tick"] is None
    assert body["success_time_s"] is None


def test_run_inline_scenario(client):
    scenario = scenario_to_dict(build_preset("unreachable"))
    res = client.post("/api/runs", json={"scenario": scenario, "seed": 5, "max_ticks": 2})
    assert res.status_code == 200
    assert res.get_json()["seed"] == 5


def test_run_rejects_bad_input(client):
    assert client.post("/api/runs", json={}).status_code == 400
    assert client.post("/api/runs", json={"preset": "nope"}).status_code == 400
    res = client.post("/api/runs", json={"scenario": {"name": "x", "bogus": 1}})
    assert res.status_code == 400
    assert "bogus" in res.get_json()["error"]


def test_calibrate(client):
    res = client.post("/api/calibrate", json={"preset": "open-4v1"})
    assert res.status_code == 200
    assert set(res.get_json()) == {"captor", "obstacle", "target"}


def test_summary_turns_nan_into_null(client):
    reports = [
        {"initial_distance_m": 6.0, "success_time_s": 5.0, "avg_speed_mps": 2.0},
        {"initial_distance_m": 14.0, "success_time_s": None, "avg_speed_mps": 0.0},
    ]
    res = client.post("/api/summary", json={"reports": reports, "checkpoints": [6]})
    assert res.status_code == 200
    body = res.get_json()
    assert body["columns"] == ["initial_distance_m", "rate_at_6s", "avg_speed_mps", "runs"]
    assert body["rows"][0]["rate_at_6s"] == 100.0
    assert body["rows"][1]["avg_speed_mps"] is None
    assert client.post("/api/summary", json={"reports": "x"}).status_code == 400


def test_unknown_batch(client):
    assert client.get("/api/batches/missing").status_code == 404


def test_batch_requires_preset(client):
    assert client.post("/api/batches", json={"seeds": 2}).status_code == 400
    assert client.post("/api/batches", json={"preset": "open-4v1", "seeds": 0}).status_code == 400


def test_batch_runs_in_background(client, monkeypatch):
    calls = []

    def fake_batch(scenario, seeds, distances, **kwargs):
        calls.append((scenario.name, seeds, distances))
        reports = experiments.metrics.summarize([])
        return reports, reports

    monkeypatch.setattr(experiments, "run_batch", fake_batch)
    res = client.post("/api/batches", json={"preset": "open-4v1", "seeds": 3, "distances": [6, 10]})
    assert res.status_code == 202
    job_id = res.get_json()["job_id"]

    for _ in range(100):
        job = client.get(f"/api/batches/{job_id}").get_json()
        if job["status"] in ("done", "error"):
            break
        time.sleep(0.02)
    assert job["status"] == "done"
    assert job["rows"] == []
    assert calls == [("open-4v1", 3, [6.0, 10.0])]
    with extensions.jobs_lock:
        extensions.jobs.pop(job_id)


def test_finished_jobs_are_evicted_oldest_first(monkeypatch):
    monkeypatch.setattr(extensions, "jobs", {})
    extensions.remember_job("a", {"status": "done"}, 3)
    extensions.remember_job("b", {"status": "running"}, 3)
    extensions.remember_job("c", {"status": "error"}, 3)
    extensions.remember_job("d", {"status": "queued"}, 3)
    assert list(extensions.jobs) == ["b", "c", "d"]
    extensions.remember_job("e", {"status": "queued"}, 3)
    assert list(extensions.jobs) == ["b", "d", "e"]
    # unfinished jobs are never dropped, even over the limit
    extensions.remember_job("f", {"status": "queued"}, 3)
    assert list(extensions.jobs) == ["b", "d", "e", "f"]
