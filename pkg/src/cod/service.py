"""HTTP session service: live diagnostic dialogues over a JSON API.

The service holds one disease catalog and one retriever model, loaded at
startup. Sessions live in memory only: a finished session stays readable
for ten minutes, an idle live session for an hour. Per-session steps are
serialized; a second answer arriving while one is in flight gets a 409
instead of waiting.
"""

from __future__ import annotations

import os
import threading
import time
import uuid
from dataclasses import dataclass, replace
from pathlib import Path

from fastapi import Body, FastAPI
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import __version__
from .belief import BayesConfig, BeliefBackendConfig, LlmConfig, make_backend
from .engine import (
    Diagnose,
    NoSymptomsError,
    ProtocolError,
    Session,
    SessionConfig,
    trace_round_to_dict,
)
from .knowledge import DiseaseDB
from .llm import API_KEY_ENV, ENDPOINT_ENV
from .retriever import RetrieverModel

FINISHED_TTL = 600.0    # seconds a finished session stays readable
IDLE_TTL = 3600.0       # seconds a live session survives without an answer


class BackendConfigError(ValueError):
    pass


@dataclass
class _StoreEntry:
    session: Session
    lock: threading.Lock
    touched_at: float
    snapshot: dict
    finished_at: float | None = None


class SessionStore:
    """In-memory session map with TTL eviction, safe for concurrent access.

    `clock` is injectable so tests can age sessions without sleeping.
    """

    def __init__(self, clock=time.monotonic):
        self._clock = clock
        self._guard = threading.Lock()
        self._entries: dict[str, _StoreEntry] = {}

    def create(self, session: Session, snapshot: dict) -> str:
        session_id = uuid.uuid4().hex
        now = self._clock()
        entry = _StoreEntry(session=session, lock=threading.Lock(),
                            touched_at=now, snapshot=snapshot)
        if session.finished:
            entry.finished_at = now
        with self._guard:
            self._sweep(now)
            self._entries[session_id] = entry
        return session_id

    def get(self, session_id: str) -> _StoreEntry | None:
        with self._guard:
            self._sweep(self._clock())
            return self._entries.get(session_id)

    def touch(self, session_id: str, snapshot: dict) -> None:
        now = self._clock()
        with self._guard:
            entry = self._entries.get(session_id)
            if entry is None:
                return
            entry.touched_at = now
            entry.snapshot = snapshot
            if entry.session.finished and entry.finished_at is None:
                entry.finished_at = now

    def live_count(self) -> int:
        with self._guard:
            self._sweep(self._clock())
            return len(self._entries)

    def _sweep(self, now: float) -> None:
        expired = [
            sid for sid, e in self._entries.items()
            if (e.finished_at is not None and now - e.finished_at > FINISHED_TTL)
            or (e.finished_at is None and now - e.touched_at > IDLE_TTL)
        ]
        for sid in expired:
            del self._entries[sid]


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def _final_payload(db: DiseaseDB, decision: Diagnose) -> dict:
    record = db.by_id.get(decision.disease)
    return {
        "disease": decision.disease,
        "name": record.name if record else decision.disease,
        "confidence": decision.confidence,
        "forced": decision.forced,
        "overview": record.overview if record else "",
        "treatment": record.treatment if record else "",
    }


def _round_payload(db: DiseaseDB, session: Session, trace_round) -> dict:
    payload = {
        "round": trace_round_to_dict(trace_round),
        "finished": session.finished,
        "final": None,
    }
    if session.finished and isinstance(trace_round.decision, Diagnose):
        payload["final"] = _final_payload(db, trace_round.decision)
    return payload


def _session_snapshot(db: DiseaseDB, session: Session) -> dict:
    cfg = session.config
    state = session.state
    snapshot = {
        "finished": session.finished,
        "config": {"tau": cfg.tau, "max_rounds": cfg.max_rounds, "k": cfg.k,
                   "entropy_mode": cfg.entropy_mode},
        "evidence": {"present": sorted(state.evidence.present),
                     "absent": sorted(state.evidence.absent)},
        "asked": list(state.asked),
        "pending": state.pending,
        "rounds": [trace_round_to_dict(t) for t in session.trace],
        "final": None,
    }
    if session.trace and isinstance(session.trace[-1].decision, Diagnose):
        snapshot["final"] = _final_payload(db, session.trace[-1].decision)
    return snapshot


def create_app(db: DiseaseDB, model: RetrieverModel, *,
               session_config: SessionConfig | None = None,
               backend_config: BeliefBackendConfig | None = None,
               static_dir: str | Path | None = None,
               clock=time.monotonic) -> FastAPI:
    """Build the FastAPI app around one catalog + retriever model."""
    base_config = session_config or SessionConfig()
    base_backend = backend_config or BeliefBackendConfig(kind="bayes", bayes=BayesConfig())
    store = SessionStore(clock=clock)
    shared_bayes = make_backend(BeliefBackendConfig(kind="bayes", bayes=base_backend.bayes))

    def resolve_backend(kind: str | None):
        kind = kind or base_backend.kind
        if kind == "bayes":
            return shared_bayes
        if kind == "llm":
            llm_cfg = base_backend.llm
            if not llm_cfg.endpoint:
                endpoint = os.environ.get(ENDPOINT_ENV)
                if not endpoint:
                    raise BackendConfigError(
                        f"llm backend requires {ENDPOINT_ENV} to be set")
                llm_cfg = LlmConfig(endpoint=endpoint,
                                    api_key=os.environ.get(API_KEY_ENV))
            # fresh instance per session: the llm backend keeps dialogue state
            return make_backend(BeliefBackendConfig(kind="llm", llm=llm_cfg))
        raise BackendConfigError(f"unknown backend kind: {kind!r}")

    app = FastAPI(title="cod session service", version=__version__)
    app.state.store = store
    app.state.db = db

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__,
                "sessions": store.live_count()}

    @app.get("/api/config")
    def config() -> dict:
        return {
            "version": __version__,
            "backend": base_backend.kind,
            "llm_configured": bool(os.environ.get(ENDPOINT_ENV)),
            "defaults": {"tau": base_config.tau,
                         "max_rounds": base_config.max_rounds,
                         "k": base_config.k,
                         "entropy_mode": base_config.entropy_mode},
            "vocabulary": list(db.symptom_vocab),
            "diseases": [{"id": d.id, "name": d.name, "department": d.department}
                         for d in db.diseases],
        }

    @app.post("/api/sessions")
    def create_session(body: dict = Body(...)):
        symptoms = body.get("symptoms")
        if not isinstance(symptoms, list) or not symptoms:
            return _error(400, "symptoms must be a non-empty list")
        overrides = {key: body[key]
                     for key in ("tau", "max_rounds", "k", "entropy_mode")
                     if body.get(key) is not None}
        try:
            cfg = replace(base_config, **overrides)
            backend = resolve_backend(body.get("backend"))
        except (ValueError, TypeError) as exc:
            return _error(422, str(exc))
        session = Session(db, model, cfg, backend)
        try:
            trace_round = session.start({"symptoms": symptoms})
        except NoSymptomsError as exc:
            return _error(400, str(exc))
        except (ValueError, TypeError) as exc:
            return _error(400, f"bad symptoms: {exc}")
        session_id = store.create(session, _session_snapshot(db, session))
        payload = {"session_id": session_id}
        payload.update(_round_payload(db, session, trace_round))
        return JSONResponse(payload, status_code=201)

    @app.post("/api/sessions/{session_id}/answer")
    def answer_session(session_id: str, body: dict = Body(...)):
        entry = store.get(session_id)
        if entry is None:
            return _error(404, "unknown session")
        if not entry.lock.acquire(blocking=False):
            return _error(409, "another answer is already in flight")
        try:
            session = entry.session
            if session.finished:
                return _error(409, "session already finished")
            raw = body.get("answer")
            if not isinstance(raw, str):
                return _error(400, "answer must be 'yes' or 'no'")
            try:
                trace_round = session.answer({"answer": raw})
            except ProtocolError as exc:
                return _error(409, str(exc))
            except ValueError as exc:
                return _error(400, str(exc))
            payload = {"session_id": session_id}
            payload.update(_round_payload(db, session, trace_round))
        finally:
            entry.lock.release()
        store.touch(session_id, _session_snapshot(db, session))
        return JSONResponse(payload)

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        entry = store.get(session_id)
        if entry is None:
            return _error(404, "unknown session")
        payload = {"session_id": session_id}
        payload.update(entry.snapshot)
        return JSONResponse(payload)

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="console")

    return app
