"""HTTP service for the human-in-the-loop workflow.

One mutating request in flight per session (409 on conflict); reads never
block. Backends are shared across sessions.
"""

import json
import logging
import threading
from pathlib import Path

from fastapi import FastAPI, Form, HTTPException, Response, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import RedirectResponse
from fastapi.staticfiles import StaticFiles

from . import outputs as outputs_mod
from . import session as sess
from .backends import make_backend
from .config import BackendConfig, SessionConfig
from .errors import (AlreadyDecided, AngioforgeError, BackendFailure,
                     BackendUnavailable, EmptyPrompt, ImageTooLarge,
                     ImageTooSmall, ManifestCorrupt, MeshValidationFailure,
                     MissingArtifact, NoPriorAttempt, RecordNotFound,
                     SessionComplete, UndecodableImage)

log = logging.getLogger(__name__)

_MEDIA_TYPES = {".png": "image/png", ".json": "application/json",
                ".stl": "model/stl"}


def _http_error(exc: Exception) -> HTTPException:
    if isinstance(exc, (UndecodableImage, ImageTooSmall, ImageTooLarge,
                        EmptyPrompt)):
        return HTTPException(400, str(exc))
    if isinstance(exc, (RecordNotFound, MissingArtifact)):
        return HTTPException(404, str(exc))
    if isinstance(exc, (SessionComplete, AlreadyDecided, NoPriorAttempt)):
        return HTTPException(409, str(exc))
    if isinstance(exc, BackendUnavailable):
        return HTTPException(502, detail={
            "error": str(exc), "attempts": exc.attempts})
    if isinstance(exc, BackendFailure):
        return HTTPException(502, str(exc))
    if isinstance(exc, (ManifestCorrupt, MeshValidationFailure)):
        return HTTPException(500, str(exc))
    return HTTPException(500, str(exc))


def _step_summary(session):
    steps = []
    for spec in session.pipeline.steps:
        records = session.records_for(spec.index)
        state = "untouched"
        if any(r.state == sess.ACCEPTED for r in records):
            state = "accepted"
        elif any(r.state == sess.PENDING for r in records):
            state = "pending"
        elif records:
            state = "rejected"
        steps.append({
            "index": spec.index,
            "name": spec.name,
            "stage": spec.stage.value,
            "state": state,
            "iterations": len(records),
        })
    return steps


def session_summary(session) -> dict:
    return {
        "id": session.id,
        "created_at": session.created_at,
        "status": session.status,
        "cursor": session.cursor,
        "source_hash": session.source_hash,
        "config": session.config.to_dict(),
        "steps": _step_summary(session),
    }


def create_app(store_root, backend_config: BackendConfig | None = None,
               session_defaults: SessionConfig | None = None,
               ui_dir=None, cors_origins=("*",)) -> FastAPI:
    store = sess.SessionStore(store_root)
    backend_config = backend_config or BackendConfig()
    backend = make_backend(backend_config)
    defaults = session_defaults or SessionConfig(backend=backend_config)

    app = FastAPI(title="angioforge")
    if cors_origins:
        app.add_middleware(CORSMiddleware, allow_origins=list(cors_origins),
                           allow_methods=["*"], allow_headers=["*"])

    cache: dict = {}
    locks: dict = {}
    registry_lock = threading.Lock()

    def get_session(session_id: str):
        with registry_lock:
            if session_id in cache:
                return cache[session_id]
        try:
            loaded = store.load(session_id)
        except AngioforgeError as exc:
            raise _http_error(exc) from exc
        with registry_lock:
            cache.setdefault(session_id, loaded)
            return cache[session_id]

    def mutate(session_id: str):
        with registry_lock:
            lock = locks.setdefault(session_id, threading.Lock())
        if not lock.acquire(blocking=False):
            raise HTTPException(
                409, "another operation is in flight for this session")
        return lock

    @app.post("/sessions", status_code=201)
    async def create(image: UploadFile, config: str | None = Form(default=None)):
        data = await image.read()
        session_config = defaults
        if config:
            try:
                overrides = json.loads(config)
            except json.JSONDecodeError as exc:
                raise HTTPException(400, f"bad config JSON: {exc}") from exc
            base = defaults.to_dict()
            base.update({k: v for k, v in overrides.items() if k != "backend"})
            session_config = SessionConfig.from_dict(base)
        try:
            session = sess.create_session(store, data, session_config)
        except AngioforgeError as exc:
            raise _http_error(exc) from exc
        with registry_lock:
            cache[session.id] = session
        return session_summary(session)

    @app.get("/sessions")
    def list_sessions():
        return {"sessions": store.list_sessions()}

    @app.get("/sessions/{session_id}")
    def summary(session_id: str):
        return session_summary(get_session(session_id))

    @app.post("/sessions/{session_id}/advance")
    def advance(session_id: str):
        session = get_session(session_id)
        lock = mutate(session_id)
        try:
            record = sess.advance_step(store, session, backend)
            return record.to_dict()
        except AngioforgeError as exc:
            raise _http_error(exc) from exc
        finally:
            lock.release()

    @app.post("/sessions/{session_id}/steps/{step}/regenerate")
    def regenerate(session_id: str, step: int, body: dict):
        session = get_session(session_id)
        prompt = body.get("prompt", "")
        if step != session.cursor:
            raise HTTPException(
                409, f"step {step} is not the cursor step ({session.cursor})")
        lock = mutate(session_id)
        try:
            record = sess.regenerate_step(store, session, backend, prompt)
            return record.to_dict()
        except AngioforgeError as exc:
            raise _http_error(exc) from exc
        finally:
            lock.release()

    def _decide(session_id: str, step: int, iteration: int, decision: str):
        session = get_session(session_id)
        lock = mutate(session_id)
        try:
            fn = sess.accept_step if decision == sess.ACCEPTED else sess.reject_step
            try:
                fn(store, session, step, iteration)
            except AlreadyDecided as exc:
                record = session.find_record(step, iteration)
                if record.state != decision:
                    raise _http_error(exc) from exc
                # idempotent repeat: same terminal state, no new records
            except AngioforgeError as exc:
                raise _http_error(exc) from exc
            return session_summary(session)
        finally:
            lock.release()

    @app.post("/sessions/{session_id}/steps/{step}/iterations/{iteration}/accept")
    def accept(session_id: str, step: int, iteration: int):
        return _decide(session_id, step, iteration, sess.ACCEPTED)

    @app.post("/sessions/{session_id}/steps/{step}/iterations/{iteration}/reject")
    def reject(session_id: str, step: int, iteration: int):
        return _decide(session_id, step, iteration, sess.REJECTED)

    @app.get("/sessions/{session_id}/history")
    def history(session_id: str):
        session = get_session(session_id)
        return {"records": [r.to_dict() for r in session.records]}

    @app.get("/sessions/{session_id}/artifacts/{content_hash}")
    def artifact(session_id: str, content_hash: str):
        session = get_session(session_id)
        if content_hash not in session.artifacts:
            raise HTTPException(404, f"unknown artifact {content_hash}")
        try:
            data = store.get_artifact(session_id, content_hash)
        except AngioforgeError as exc:
            raise _http_error(exc) from exc
        return Response(content=data, media_type="image/png")

    @app.get("/sessions/{session_id}/outputs/{name}")
    def final_output(session_id: str, name: str):
        if name not in outputs_mod.OUTPUT_NAMES:
            raise HTTPException(404, f"unknown output {name}")
        session = get_session(session_id)
        if not outputs_mod.outputs_ready(session):
            raise HTTPException(404, "outputs not produced yet")
        try:
            results = outputs_mod.compute_outputs(store, session)
        except AngioforgeError as exc:
            raise _http_error(exc) from exc
        media = _MEDIA_TYPES[Path(name).suffix]
        return Response(content=results[name], media_type=media)

    @app.get("/healthz")
    def healthz():
        return {"backend": backend_config.kind, "status": backend.health_check()}

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True),
                  name="ui")

        @app.get("/", include_in_schema=False)
        def index():
            return RedirectResponse("/ui/")

    return app
