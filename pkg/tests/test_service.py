"""HTTP API: session lifecycle, status codes, TTL eviction, concurrency."""

import pytest
from fastapi.testclient import TestClient

from cod.engine import SessionConfig
from cod.service import FINISHED_TTL, IDLE_TTL, create_app


class FakeClock:
    def __init__(self):
        self.now = 0.0

    def __call__(self) -> float:
        return self.now


@pytest.fixture
def clock():
    return FakeClock()


@pytest.fixture
def client(demo_db, demo_model, clock, monkeypatch):
    monkeypatch.delenv("COD_LLM_ENDPOINT", raising=False)
    app = create_app(demo_db, demo_model, clock=clock)
    return TestClient(app)


def open_session(client, symptoms, **extra):
    response = client.post("/api/sessions", json={"symptoms": symptoms, **extra})
    assert response.status_code == 201, response.text
    return response.json()


def answer_until_finished(client, opened, limit=6):
    body = opened
    for _ in range(limit):
        if body["finished"]:
            return body
        response = client.post(f"/api/sessions/{opened['session_id']}/answer",
                               json={"answer": "yes"})
        assert response.status_code == 200, response.text
        body = response.json()
    raise AssertionError("session did not finish")


# ---------------------------------------------------------------------------
# read-only endpoints
# ---------------------------------------------------------------------------

def test_health(client):
    body = client.get("/api/health").json()
    assert body["status"] == "ok"
    assert body["sessions"] == 0
    assert isinstance(body["version"], str)


def test_config_describes_the_catalog(client, demo_db):
    body = client.get("/api/config").json()
    assert body["backend"] == "bayes"
    assert body["llm_configured"] is False
    assert body["defaults"] == {"tau": 0.5, "max_rounds": 5, "k": 5,
                                "entropy_mode": "present-only"}
    assert body["vocabulary"] == list(demo_db.symptom_vocab)
    assert len(body["diseases"]) == len(demo_db)
    assert {"id", "name", "department"} <= set(body["diseases"][0])


# ---------------------------------------------------------------------------
# session lifecycle
# ---------------------------------------------------------------------------

def test_ambiguous_opener_asks_a_question(client):
    body = open_session(client, ["runny nose"])
    assert body["finished"] is False
    assert body["final"] is None
    assert body["round"]["round"] == 1
    assert body["round"]["decision"]["kind"] == "inquire"
    assert body["round"]["decision"]["question"].startswith("Do you have")
    assert client.get("/api/health").json()["sessions"] == 1


def test_decisive_opener_finishes_immediately(client):
    body = open_session(client, ["sudden chills", "runny nose"])
    assert body["finished"] is True
    final = body["final"]
    assert final["disease"] == "influenza"
    assert final["name"] == "Influenza"
    assert final["forced"] is False
    assert final["confidence"] > 0.5
    assert final["treatment"]


def test_answer_flow_reaches_a_diagnosis(client):
    opened = open_session(client, ["runny nose"])
    finished = answer_until_finished(client, opened)
    assert finished["final"]["disease"]
    assert finished["round"]["decision"]["kind"] == "diagnose"

    snapshot = client.get(f"/api/sessions/{opened['session_id']}").json()
    assert snapshot["finished"] is True
    assert snapshot["final"] == finished["final"]
    assert "runny nose" in snapshot["evidence"]["present"]
    assert len(snapshot["rounds"]) == finished["round"]["round"]


def test_snapshot_tracks_rounds_and_pending(client):
    opened = open_session(client, ["runny nose"])
    sid = opened["session_id"]
    first = client.get(f"/api/sessions/{sid}").json()
    assert first["pending"] == opened["round"]["decision"]["symptom"]
    assert len(first["rounds"]) == 1
    assert first["asked"] == []

    client.post(f"/api/sessions/{sid}/answer", json={"answer": "no"})
    second = client.get(f"/api/sessions/{sid}").json()
    assert len(second["rounds"]) == 2
    assert second["asked"] == [first["pending"]]
    assert first["pending"] in second["evidence"]["absent"]
    # reads are stable: a repeated GET returns the same snapshot
    assert client.get(f"/api/sessions/{sid}").json() == second


def test_sessions_are_isolated(client):
    a = open_session(client, ["runny nose"])
    b = open_session(client, ["runny nose"])
    client.post(f"/api/sessions/{a['session_id']}/answer", json={"answer": "yes"})
    snapshot_b = client.get(f"/api/sessions/{b['session_id']}").json()
    assert len(snapshot_b["rounds"]) == 1
    assert snapshot_b["finished"] is False


def test_config_overrides_apply_per_session(client):
    opened = open_session(client, ["runny nose"], tau=0.9, max_rounds=2,
                          entropy_mode="expected")
    snapshot = client.get(f"/api/sessions/{opened['session_id']}").json()
    assert snapshot["config"]["tau"] == 0.9
    assert snapshot["config"]["max_rounds"] == 2
    assert snapshot["config"]["entropy_mode"] == "expected"


# ---------------------------------------------------------------------------
# error contracts
# ---------------------------------------------------------------------------

def test_create_rejects_bad_symptom_payloads(client):
    for payload in ({}, {"symptoms": []}, {"symptoms": "cough"}):
        response = client.post("/api/sessions", json=payload)
        assert response.status_code == 400
        assert "non-empty list" in response.json()["error"]
    unknown = client.post("/api/sessions", json={"symptoms": ["glowing aura"]})
    assert unknown.status_code == 400
    assert "no recognizable symptoms" in unknown.json()["error"]


def test_create_rejects_bad_config(client):
    for overrides in (dict(tau=1.5), dict(max_rounds=-1), dict(k=0),
                      dict(entropy_mode="psychic"), dict(backend="tarot")):
        response = client.post("/api/sessions",
                               json={"symptoms": ["runny nose"], **overrides})
        assert response.status_code == 422, overrides


def test_llm_backend_requires_endpoint(client):
    response = client.post("/api/sessions",
                           json={"symptoms": ["runny nose"], "backend": "llm"})
    assert response.status_code == 422
    assert "COD_LLM_ENDPOINT" in response.json()["error"]


def test_unknown_session_is_404(client):
    assert client.get("/api/sessions/deadbeef").status_code == 404
    response = client.post("/api/sessions/deadbeef/answer", json={"answer": "yes"})
    assert response.status_code == 404


def test_bad_answers_are_400(client):
    sid = open_session(client, ["runny nose"])["session_id"]
    for payload in ({}, {"answer": 5}, {"answer": ["yes"]}):
        response = client.post(f"/api/sessions/{sid}/answer", json=payload)
        assert response.status_code == 400
        assert "must be 'yes' or 'no'" in response.json()["error"]
    response = client.post(f"/api/sessions/{sid}/answer", json={"answer": "maybe"})
    assert response.status_code == 400
    # the session survives malformed answers
    assert client.post(f"/api/sessions/{sid}/answer",
                       json={"answer": "yes"}).status_code == 200


def test_answering_a_finished_session_is_409(client):
    opened = open_session(client, ["sudden chills", "runny nose"])
    assert opened["finished"]
    response = client.post(f"/api/sessions/{opened['session_id']}/answer",
                           json={"answer": "yes"})
    assert response.status_code == 409
    assert "finished" in response.json()["error"]


def test_concurrent_answer_gets_409(client):
    opened = open_session(client, ["runny nose"])
    sid = opened["session_id"]
    store = client.app.state.store
    entry = store.get(sid)
    assert entry.lock.acquire(blocking=False)
    try:
        response = client.post(f"/api/sessions/{sid}/answer", json={"answer": "yes"})
        assert response.status_code == 409
        assert "in flight" in response.json()["error"]
    finally:
        entry.lock.release()
    assert client.post(f"/api/sessions/{sid}/answer",
                       json={"answer": "yes"}).status_code == 200


# ---------------------------------------------------------------------------
# TTL eviction
# ---------------------------------------------------------------------------

def test_finished_sessions_expire(client, clock):
    opened = open_session(client, ["sudden chills", "runny nose"])
    sid = opened["session_id"]
    clock.now = FINISHED_TTL            # boundary is strict: still readable
    assert client.get(f"/api/sessions/{sid}").status_code == 200
    clock.now = FINISHED_TTL + 0.1
    assert client.get(f"/api/sessions/{sid}").status_code == 404
    assert client.get("/api/health").json()["sessions"] == 0


def test_idle_live_sessions_expire_and_reads_do_not_refresh(client, clock):
    sid = open_session(client, ["runny nose"])["session_id"]
    clock.now = IDLE_TTL - 10
    assert client.get(f"/api/sessions/{sid}").status_code == 200
    # that read must not extend the lease
    clock.now = IDLE_TTL + 0.1
    assert client.get(f"/api/sessions/{sid}").status_code == 404


def test_answers_refresh_the_idle_lease(client, clock):
    sid = open_session(client, ["runny nose"])["session_id"]
    clock.now = IDLE_TTL - 10
    assert client.post(f"/api/sessions/{sid}/answer",
                       json={"answer": "no"}).status_code == 200
    clock.now = IDLE_TTL + 10           # past the original lease, not the new one
    assert client.get(f"/api/sessions/{sid}").status_code == 200


# ---------------------------------------------------------------------------
# static console mount
# ---------------------------------------------------------------------------

def test_static_mount_serves_index(tmp_path, demo_db, demo_model):
    (tmp_path / "index.html").write_text("<h1>console</h1>")
    app = create_app(demo_db, demo_model, static_dir=tmp_path)
    with TestClient(app) as mounted:
        response = mounted.get("/")
        assert response.status_code == 200
        assert "console" in response.text
        # API routes still win over the static mount
        assert mounted.get("/api/health").status_code == 200


def test_without_static_dir_root_is_404(client):
    assert client.get("/").status_code == 404
