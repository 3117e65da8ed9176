"""FastAPI session server wrapping the proof-script engine.

One engine per session; sessions are isolated and single-threaded (a lock
serializes requests within a session).  The workbench's static bundle is
served from frontend/dist when present.
"""

from __future__ import annotations

import threading
import uuid
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException

from ..kernel.script import CommandResult, Engine, ScriptError, split_commands
from ..parser import ParseError
from .models import Health, ProtocolRequest, ProtocolResponse, SessionCreated, SessionLog


class _Session:
    def __init__(self, budget: int):
        self.engine = Engine(budget=budget)
        self.lock = threading.Lock()


def _state_payload(engine: Engine, text: str = "") -> dict:
    summary = engine.summary()
    sess = engine.sess
    goals = []
    if sess is not None and sess.lemma_name is not None:
        goals = [g.pretty() for g in sess.goals]
    return {
        "text": text,
        "lemmas": summary["lemmas"],
        "open_lemma": summary["open"],
        "admitted_total": summary["admitted_total"],
        "goals": goals,
        "certificate": engine.certificate_text(),
    }


def create_app(budget: int = 4096, frontend_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="qrhlkit session server", version="1")
    sessions: dict = {}

    @app.get("/health", response_model=Health)
    def health():
        return Health()

    @app.post("/sessions", response_model=SessionCreated)
    def create_session():
        sid = uuid.uuid4().hex
        sessions[sid] = _Session(budget)
        return SessionCreated(session_id=sid)

    def _get(sid: str) -> _Session:
        if sid not in sessions:
            raise HTTPException(status_code=404, detail="unknown session")
        return sessions[sid]

    @app.post("/sessions/{sid}/message", response_model=ProtocolResponse)
    def message(sid: str, req: ProtocolRequest):
        sess = _get(sid)
        with sess.lock:
            eng = sess.engine
            try:
                if req.kind == "load":
                    text = req.payload.get("text", "")
                    results = eng.run_text(text)
                    errors = [r.text for r in results if r.kind == "error"]
                    if errors:
                        return ProtocolResponse(kind="error", payload={"text": "; ".join(errors)})
                    return ProtocolResponse(kind="state", payload=_state_payload(eng, f"{len(results)} command(s) executed"))
                if req.kind == "state":
                    return ProtocolResponse(kind="state", payload=_state_payload(eng))
                if req.kind == "tactic":
                    res = eng.execute(req.payload.get("command", ""))
                    if res.kind == "error":
                        return ProtocolResponse(kind="error", payload={"text": res.text, **_drop_text(_state_payload(eng))})
                    return ProtocolResponse(kind=res.kind if res.kind in ("goals", "varsets", "predeval") else "state",
                                            payload=_state_payload(eng, res.text))
                if req.kind == "undo":
                    res = eng.execute("undo")
                    if res.kind == "error":
                        return ProtocolResponse(kind="error", payload={"text": res.text})
                    return ProtocolResponse(kind="state", payload=_state_payload(eng, "undone"))
                if req.kind == "goals":
                    res = eng.execute("goals")
                    return ProtocolResponse(kind="goals", payload=_state_payload(eng, res.text))
                if req.kind == "varsets":
                    res = eng.execute("varsets " + req.payload.get("program", ""))
                    if res.kind == "error":
                        return ProtocolResponse(kind="error", payload={"text": res.text})
                    return ProtocolResponse(kind="varsets", payload={"text": res.text})
                if req.kind == "predeval":
                    res = eng.execute("predeval { " + req.payload.get("pred", "") + " }")
                    if res.kind == "error":
                        return ProtocolResponse(kind="error", payload={"text": res.text})
                    return ProtocolResponse(kind="predeval", payload={"text": res.text})
            except (ScriptError, ParseError) as e:
                return ProtocolResponse(kind="error", payload={"text": str(e)})
        raise HTTPException(status_code=400, detail=f"unknown message kind {req.kind}")

    @app.get("/sessions/{sid}/log", response_model=SessionLog)
    def get_log(sid: str):
        sess = _get(sid)
        with sess.lock:
            return SessionLog(session_id=sid, entries=list(sess.engine.log))

    @app.delete("/sessions/{sid}")
    def delete_session(sid: str):
        sessions.pop(sid, None)
        return {"deleted": sid}

    dist = Path(frontend_dir) if frontend_dir else Path(__file__).resolve().parents[3] / "frontend" / "dist"
    if dist.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(dist), html=True), name="workbench")
    return app


def _drop_text(payload: dict) -> dict:
    payload = dict(payload)
    payload.pop("text", None)
    return payload
