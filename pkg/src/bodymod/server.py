"""HTTP + WebSocket transport over the session service.

Endpoints (JSON):
  GET  /health
  GET  /models/{model_id}/assets          base mesh, faces, morph-target table
  POST /sessions                          {participant, base_weight, model_id, protocol, seed}
  GET  /sessions/{id}                     current trial descriptor
  POST /sessions/{id}/level               {t, level}   (passive trials; response carries no weight)
  POST /sessions/{id}/estimate            {t, kg}
  GET  /sessions/{id}/results
  GET  /sessions/{id}/log                 raw JSON-Lines session log
  WS   /sessions/{id}/stream              client sends input messages, server answers
                                          weight ticks (active trials only)

Streamed message schema: {"type": "input"|"weight"|"morph"|"trial"|"error", "t": seconds, ...}.
"""
from __future__ import annotations

import json

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .interaction import InputSample
from .service import ProtocolError, Service, ServiceError


class CreateSessionRequest(BaseModel):
    participant: int
    base_weight: float
    model_id: str
    protocol: str = "full"
    seed: int = 0


class LevelRequest(BaseModel):
    t: float
    level: int


class EstimateRequest(BaseModel):
    t: float
    kg: float


def create_app(service: Service) -> FastAPI:
    app = FastAPI(title="bodymod session service")

    @app.exception_handler(ServiceError)
    async def service_error(request, exc: ServiceError):
        status = 409 if isinstance(exc, ProtocolError) else 400
        return JSONResponse(status_code=status, content={"error": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok", "models": sorted(service.models)}

    @app.get("/models/{model_id}/assets")
    def assets(model_id: str):
        return service.get_morph_assets(model_id)

    @app.post("/sessions")
    def create_session(req: CreateSessionRequest):
        session_id = service.create_session(
            participant=req.participant, base_weight=req.base_weight,
            model_id=req.model_id, protocol=req.protocol, seed=req.seed)
        return {"session_id": session_id,
                "trial": service.session(session_id).trial_descriptor()}

    @app.get("/sessions/{session_id}")
    def session_state(session_id: str):
        return service.session(session_id).trial_descriptor()

    @app.post("/sessions/{session_id}/level")
    def set_level(session_id: str, req: LevelRequest):
        # the presented weight stays server-side; clients get only a morph blend
        return service.presentation_payload(session_id, req.t, req.level)

    @app.post("/sessions/{session_id}/estimate")
    def submit_estimate(session_id: str, req: EstimateRequest):
        result = service.submit_estimate(session_id, req.t, req.kg)
        result["trial"] = service.session(session_id).trial_descriptor()
        return result

    @app.get("/sessions/{session_id}/results")
    def results(session_id: str):
        return service.get_results(session_id)

    @app.get("/sessions/{session_id}/log")
    def export_log(session_id: str):
        return PlainTextResponse(service.export_log(session_id),
                                 media_type="application/jsonl")

    @app.websocket("/sessions/{session_id}/stream")
    async def stream(websocket: WebSocket, session_id: str):
        await websocket.accept()
        try:
            while True:
                message = await websocket.receive_json()
                if message.get("type") != "input":
                    await websocket.send_json(
                        {"type": "error", "message": f"unsupported message {message.get('type')!r}"})
                    continue
                try:
                    sample = InputSample.from_json(
                        json.dumps({k: v for k, v in message.items() if k != "type"}))
                except (KeyError, ValueError) as exc:
                    await websocket.send_json({"type": "error", "message": str(exc)})
                    continue
                try:
                    kg = service.stream_input(session_id, sample)
                except ServiceError as exc:
                    await websocket.send_json({"type": "error", "message": str(exc)})
                    continue
                await websocket.send_json({"type": "weight", "t": sample.timestamp, "kg": kg})
        except WebSocketDisconnect:
            pass

    return app


def run(service: Service, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    uvicorn.run(create_app(service), host=host, port=port, log_level="warning")
