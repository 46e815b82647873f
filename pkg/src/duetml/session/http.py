"""REST + server-sent-events API over the session manager.

Endpoints (JSON bodies unless noted):
  POST /v1/sessions                      -> {"session_id"}
  POST /v1/sessions/{id}/dataset?role=train|test  body = raw CSV
  POST /v1/sessions/{id}/instructions    {"text"} -> 202 {"seq"}
  GET  /v1/sessions/{id}/events?from=N   -> SSE stream
  GET  /v1/sessions/{id}/report
  GET  /v1/sessions/{id}/artifacts/{name}

Errors are {"code", "message"} with status 404/400/429.
The SSE stream accepts an optional ``max`` query parameter that closes the
stream after that many events, which keeps curl sessions and tests finite.
"""

from __future__ import annotations

import json

from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse, StreamingResponse

from ..errors import DuetError
from .manager import SessionManager

_STATUS = {
    "E_SESSION_NOT_FOUND": 404,
    "E_NOT_FOUND": 404,
    "E_QUEUE_FULL": 429,
    "E_CAPACITY": 429,
}


def _http_status(exc: DuetError) -> int:
    return _STATUS.get(exc.code, 400)


def sse_format(event: dict) -> str:
    data = dict(event["payload"]) if isinstance(event["payload"], dict) \
        else {"value": event["payload"]}
    data["seq"] = event["seq"]
    data["ts"] = event["ts"]
    return (f"id: {event['seq']}\n"
            f"event: {event['type']}\n"
            f"data: {json.dumps(data, sort_keys=True)}\n\n")


def build_app(manager: SessionManager) -> FastAPI:
    app = FastAPI(title="duetml session service")
    app.state.manager = manager

    @app.exception_handler(DuetError)
    async def duet_error_handler(request: Request, exc: DuetError):
        return JSONResponse(status_code=_http_status(exc),
                            content={"code": exc.code, "message": str(exc)})

    @app.post("/v1/sessions", status_code=201)
    def create_session():
        session = manager.create_session()
        return {"session_id": session.id}

    @app.post("/v1/sessions/{session_id}/dataset")
    async def attach_dataset(session_id: str, request: Request,
                             role: str = Query(...)):
        session = manager.get(session_id)
        body = await request.body()
        return session.attach_dataset(role, body)

    @app.post("/v1/sessions/{session_id}/instructions", status_code=202)
    async def submit_instruction(session_id: str, request: Request):
        session = manager.get(session_id)
        body = await request.json()
        text = body.get("text") if isinstance(body, dict) else None
        if not text or not isinstance(text, str):
            raise DuetError("body must be {\"text\": <instruction>}",
                            code="E_BAD_CONFIG")
        return {"seq": session.submit_instruction(text)}

    @app.get("/v1/sessions/{session_id}/events")
    def stream_events(session_id: str,
                      from_seq: int = Query(1, alias="from", ge=1),
                      max_events: int | None = Query(None, alias="max",
                                                     ge=1)):
        manager.get(session_id)  # fail fast with 404 before streaming

        def generate():
            sent = 0
            for event in manager.stream_events(session_id, from_seq):
                if event is None:
                    yield ": keep-alive\n\n"
                    continue
                yield sse_format(event)
                sent += 1
                if max_events is not None and sent >= max_events:
                    return

        return StreamingResponse(generate(),
                                 media_type="text/event-stream")

    @app.get("/v1/sessions/{session_id}/report")
    def get_report(session_id: str):
        return manager.get(session_id).report()

    @app.get("/v1/sessions/{session_id}/artifacts/{name}")
    def get_artifact(session_id: str, name: str):
        data = manager.get(session_id).artifact(name)
        return Response(content=data, media_type="text/csv")

    return app
