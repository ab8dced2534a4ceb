"""HTTP/JSON facade over annotation sessions.

State is an append-only JSON-lines event log (create/answer events). The
scheduler is a deterministic state machine, so replaying the log on startup
reconstructs every session exactly; each answer is persisted before the
response is sent.
"""
from __future__ import annotations

import json
import os
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .annotation import (
    ANSWERS,
    AnnotationSession,
    final_ordering,
    next_question,
    session_relations,
    submit_answer,
)


class SessionStore:
    """Sessions plus the item registry (2D poses to display)."""

    def __init__(self, registry: dict, log_path: str | Path | None = None):
        self.items: dict = registry["items"]
        self.skeleton: dict = registry.get("skeleton", {})
        self.sessions: dict[str, AnnotationSession] = {}
        self.log_path = Path(log_path) if log_path else None
        self._counter = 0
        self._lock = threading.Lock()
        if self.log_path and self.log_path.exists():
            self._replay()

    def _replay(self):
        with open(self.log_path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                event = json.loads(line)
                if event["type"] == "create":
                    sid = event["session_id"]
                    self.sessions[sid] = AnnotationSession(
                        item_id=event["item_id"], joint_count=event["joint_count"]
                    )
                    self._counter = max(self._counter, int(sid.split("-")[1]) + 1)
                elif event["type"] == "answer":
                    submit_answer(self.sessions[event["session_id"]], event["answer"])

    def _append_event(self, event: dict):
        if self.log_path is None:
            return
        with open(self.log_path, "a", encoding="utf-8") as f:
            f.write(json.dumps(event) + "\n")
            f.flush()
            os.fsync(f.fileno())

    def create_session(self, item_id: str) -> str:
        with self._lock:
            if item_id not in self.items:
                raise KeyError(item_id)
            sid = f"session-{self._counter:06d}"
            self._counter += 1
            joint_count = len(self.items[item_id]["pose2d"])
            self._append_event(
                {"type": "create", "session_id": sid, "item_id": item_id, "joint_count": joint_count}
            )
            self.sessions[sid] = AnnotationSession(item_id=item_id, joint_count=joint_count)
            return sid

    def get(self, session_id: str) -> AnnotationSession:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise KeyError(session_id)

    def answer(self, session_id: str, answer: str, question_index: int | None = None):
        with self._lock:
            session = self.get(session_id)
            if session.status == "complete":
                raise RuntimeError("session complete; no pending question")
            if question_index is not None and question_index != session.question_count:
                raise RuntimeError(
                    f"stale answer: question {question_index} already handled "
                    f"(current index {session.question_count})"
                )
            self._append_event({"type": "answer", "session_id": session_id, "answer": answer})
            submit_answer(session, answer)
            return session


class CreateSessionBody(BaseModel):
    item_id: str


class AnswerBody(BaseModel):
    answer: str
    question_index: int | None = None


def _display_payload(store: SessionStore, item_id: str, highlight=None) -> dict:
    item = store.items[item_id]
    return {
        "pose2d": item["pose2d"],
        "edges": store.skeleton.get("edges", []),
        "joint_names": store.skeleton.get("names", []),
        "highlight": highlight or [],
    }


def create_app(store: SessionStore, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="ordpose annotation service")
    app.state.store = store

    @app.get("/v1/health")
    def health():
        return {"status": "ok"}

    @app.post("/v1/sessions")
    def create_session(body: CreateSessionBody):
        try:
            sid = store.create_session(body.item_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown item {body.item_id!r}")
        session = store.get(sid)
        return {
            "session_id": sid,
            "status": session.status,
            "question_count": session.question_count,
            "joint_count": session.joint_count,
        }

    @app.get("/v1/sessions/{session_id}/question")
    def get_question(session_id: str):
        try:
            session = store.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")
        if session.status == "complete":
            return {
                "status": "complete",
                "question_count": session.question_count,
                "ordering": final_ordering(session),
            }
        i, j = next_question(session)
        return {
            "status": "in-progress",
            "i": i,
            "j": j,
            "question_index": session.question_count,
            "question_count": session.question_count,
            "display": _display_payload(store, session.item_id, highlight=[i, j]),
        }

    @app.post("/v1/sessions/{session_id}/answer")
    def post_answer(session_id: str, body: AnswerBody):
        if body.answer not in ANSWERS:
            raise HTTPException(status_code=400, detail=f"invalid answer {body.answer!r}")
        try:
            session = store.answer(session_id, body.answer, body.question_index)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")
        except RuntimeError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"status": session.status, "question_count": session.question_count}

    @app.get("/v1/sessions/{session_id}/relations")
    def export_relations(session_id: str):
        try:
            session = store.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")
        if session.status != "complete":
            raise HTTPException(status_code=409, detail="session not complete")
        payload = session_relations(session).to_json()
        payload["session_id"] = session_id
        payload["question_count"] = session.question_count
        return payload

    @app.get("/v1/items/{item_id}")
    def get_item(item_id: str):
        if item_id not in store.items:
            raise HTTPException(status_code=404, detail=f"unknown item {item_id!r}")
        return {"item_id": item_id, **_display_payload(store, item_id)}

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app


def load_registry(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
