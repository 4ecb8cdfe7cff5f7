"""HTTP surface for the session service.

Six endpoints: create-session, list-sessions, get-current-query,
submit-answer, get-state, export-logs. Structural validation is pydantic's
job (422 with field locations); semantic rejections from the session layer
map to 400, unknown sessions to 404, and stale or contradictory answers to
409 with state untouched.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .sessions import KINDS, ConflictError, SessionManager
from .store import EventStore


class SessionParams(BaseModel):
    """Union of task parameters; unset fields fall back to task defaults."""

    prior_lo: Optional[float] = None
    prior_hi: Optional[float] = None
    count_lo: Optional[int] = Field(default=None, ge=0)
    count_hi: Optional[int] = Field(default=None, ge=1)
    epsilon: Optional[float] = Field(default=None, gt=0)
    delta: Optional[float] = Field(default=None, gt=0, lt=1)
    granularity: Optional[float] = Field(default=None, gt=0)
    local_radius: Optional[float] = Field(default=None, gt=0)
    eta: Optional[float] = Field(default=None, gt=0, le=1)
    update_weight: Optional[float] = Field(default=None, ge=0.5, lt=1)
    kappa: Optional[float] = Field(default=None, ge=0, le=1)
    lambda_delta: Optional[float] = Field(default=None, gt=0)
    gamma: Optional[float] = Field(default=None, gt=0)
    horizontal_rule: Optional[str] = None
    seed: Optional[int] = None
    true_count: Optional[int] = Field(default=None, ge=0)
    context: Optional[dict] = None


class CreateSessionRequest(BaseModel):
    kind: Literal["scalar-alignment", "dot-count", "ass-sample"]
    params: SessionParams = Field(default_factory=SessionParams)
    session_id: Optional[str] = Field(default=None, min_length=1, max_length=64)


class AnswerRequest(BaseModel):
    query_id: str = Field(min_length=1)
    choice: Literal["minus", "plus"]
    responder_tag: str = ""
    position: Optional[dict] = None


def create_app(store_dir: str | Path) -> FastAPI:
    app = FastAPI(title="prefalign session service")
    manager = SessionManager(EventStore(store_dir))
    app.state.manager = manager

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(KeyError)
    async def _key_error(request: Request, exc: KeyError) -> JSONResponse:
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(ConflictError)
    async def _conflict(request: Request, exc: ConflictError) -> JSONResponse:
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionRequest) -> dict:
        params = body.params.model_dump(exclude_none=True)
        return manager.create_session(body.kind, params, session_id=body.session_id)

    @app.get("/sessions")
    def list_sessions() -> list[dict]:
        return manager.list_sessions()

    @app.get("/sessions/{session_id}/query")
    def get_current_query(session_id: str) -> dict:
        return manager.describe_query(session_id)

    @app.post("/sessions/{session_id}/answers")
    def submit_answer(session_id: str, body: AnswerRequest) -> dict:
        return manager.submit_answer(session_id, body.query_id, body.choice,
                                     responder_tag=body.responder_tag,
                                     position=body.position)

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str) -> dict:
        return manager.get_state(session_id)

    @app.get("/sessions/{session_id}/export")
    def export_logs(session_id: str) -> dict:
        return manager.export_logs(session_id)

    return app
