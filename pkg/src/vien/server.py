"""Loopback-only HTTP/WebSocket translation service.

The service exposes three endpoints (field names are frozen in
docs/api.md):

* ``GET /health`` — ``{status, model, quant_type, offline}``; ``offline``
  is always ``true`` because the build contains no outbound network
  client, so the claim is structural, not configured.
* ``POST /translate`` — request ``{text, direction}``, response
  ``{translation, direction, timing_ms, prompt_tokens,
  generated_tokens, truncated}``.
* ``WS /stream`` — accepts the same request shape, answers with ordered
  ``{token}`` events followed by one ``{done, ...response}`` event whose
  ``translation`` equals the postprocessed concatenation of the streamed
  tokens.

Inference is serialized: one generation runs at a time, later requests
wait in a bounded queue (depth 8 by default) and receive ``BUSY_TIMEOUT``
when the queue is full or the wait exceeds the configured timeout.

Connections from non-loopback peers are rejected unless
``allow_nonlocal`` is set; the bind address itself must be loopback
under the same flag, so both the socket and the application layer
enforce the local-only contract.
"""

from __future__ import annotations

import asyncio
import ipaddress
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .gguf import NotFound, parse
from .gguf.constants import GgufValueType
from .gguf.reader import metadata_get
from .gguf.validate import dominant_qtype
from .model import ContextOverflow, GenParams
from .pipeline import (
    Direction,
    EmptyInput,
    StreamScrubber,
    TranslationSession,
    TranslationTurn,
    session_from_file,
    translate,
)

MODEL_NAME_KEY = "general.name"


class ServiceError(Exception):
    """Base class for service-level failures."""


class BusyTimeout(ServiceError):
    """The generation queue is full or the wait timed out."""


def is_loopback_host(host: str) -> bool:
    if host == "localhost":
        return True
    try:
        return ipaddress.ip_address(host).is_loopback
    except ValueError:
        return False


@dataclass(frozen=True)
class ServiceConfig:
    """Bind parameters and generation defaults for one service process."""

    model_path: str
    host: str = "127.0.0.1"
    port: int = 8237
    direction: Direction = Direction.VI_TO_EN
    max_new_tokens: int = 256
    temperature: float = 0.0
    seed: int = 0
    allow_nonlocal: bool = False
    queue_depth: int = 8
    busy_timeout_s: float = 30.0

    def __post_init__(self) -> None:
        if not self.allow_nonlocal and not is_loopback_host(self.host):
            raise ValueError(
                f"bind address {self.host!r} is not loopback; "
                "set allow_nonlocal to serve externally"
            )
        if self.queue_depth < 1:
            raise ValueError(f"queue_depth must be >= 1, got {self.queue_depth}")
        if self.busy_timeout_s <= 0:
            raise ValueError(
                f"busy_timeout_s must be positive, got {self.busy_timeout_s}"
            )

    def gen_params(self) -> GenParams:
        return GenParams(
            max_new_tokens=self.max_new_tokens,
            temperature=self.temperature,
            seed=self.seed,
        )


class EngineGuard:
    """Single in-flight generation with a bounded wait queue.

    Admission capacity is ``queue_depth + 1``: one request generating
    plus ``queue_depth`` waiting.  A request that cannot be admitted, or
    that waits longer than ``busy_timeout_s`` for the generation lock,
    fails with BusyTimeout instead of queueing unboundedly.
    """

    def __init__(self, queue_depth: int = 8, busy_timeout_s: float = 30.0):
        self._admission = threading.BoundedSemaphore(queue_depth + 1)
        self._generation = threading.Lock()
        self.busy_timeout_s = busy_timeout_s

    def run(self, fn):
        if not self._admission.acquire(blocking=False):
            raise BusyTimeout("generation queue is full")
        try:
            if not self._generation.acquire(timeout=self.busy_timeout_s):
                raise BusyTimeout(
                    f"no generation slot within {self.busy_timeout_s}s"
                )
            try:
                return fn()
            finally:
                self._generation.release()
        finally:
            self._admission.release()


class TranslationService:
    """One loaded model plus the queue discipline around it."""

    def __init__(self, session: TranslationSession, config: ServiceConfig,
                 model_name: str, quant_type: str):
        self.session = session
        self.config = config
        self.model_name = model_name
        self.quant_type = quant_type
        self.guard = EngineGuard(config.queue_depth, config.busy_timeout_s)

    def peer_allowed(self, host: Optional[str]) -> bool:
        # host is None when the transport carries no peer information
        # (in-process ASGI, unix sockets): nothing remote to reject.
        if self.config.allow_nonlocal or host is None:
            return True
        return is_loopback_host(host)

    def translate(self, text: str, direction: Direction,
                  on_fragment=None) -> TranslationTurn:
        def work():
            self.session.direction = direction
            return translate(self.session, text, on_fragment=on_fragment)

        return self.guard.run(work)


def service_from_config(config: ServiceConfig) -> TranslationService:
    file = parse(config.model_path)
    try:
        model_name = metadata_get(file, MODEL_NAME_KEY, GgufValueType.STRING)
    except NotFound:
        source = config.model_path
        model_name = Path(source).stem if isinstance(source, (str, Path)) else "in-memory"
    session = session_from_file(
        config.model_path,
        direction=config.direction,
        params=config.gen_params(),
    )
    return TranslationService(
        session=session,
        config=config,
        model_name=model_name,
        quant_type=dominant_qtype(file),
    )


class ApiTranslateRequest(BaseModel):
    text: str
    direction: Optional[str] = None


class ApiTranslateResponse(BaseModel):
    translation: str
    direction: str
    timing_ms: float
    prompt_tokens: int
    generated_tokens: int
    truncated: bool


def _error_body(code: str, message: str) -> dict:
    return {"error": {"code": code, "message": message}}


# HTTP status per stable error code.
_ERROR_STATUS = {
    "EMPTY_INPUT": 422,
    "INVALID_REQUEST": 422,
    "CONTEXT_OVERFLOW": 413,
    "BUSY_TIMEOUT": 503,
    "NONLOCAL_FORBIDDEN": 403,
    "INTERNAL": 500,
}


def _classify(exc: Exception) -> tuple[str, str]:
    if isinstance(exc, EmptyInput):
        return "EMPTY_INPUT", str(exc) or "text must not be empty"
    if isinstance(exc, ContextOverflow):
        return "CONTEXT_OVERFLOW", str(exc)
    if isinstance(exc, BusyTimeout):
        return "BUSY_TIMEOUT", str(exc)
    return "INTERNAL", f"{type(exc).__name__}: {exc}"


def _turn_response(turn: TranslationTurn) -> ApiTranslateResponse:
    return ApiTranslateResponse(
        translation=turn.output_text,
        direction=turn.direction.value,
        timing_ms=turn.total_ms,
        prompt_tokens=turn.prompt_tokens,
        generated_tokens=turn.generated_tokens,
        truncated=turn.truncated,
    )


def _parse_direction(service: TranslationService,
                     code: Optional[str]) -> Direction:
    if code is None:
        return service.config.direction
    return Direction.from_code(code)


def create_app(service: TranslationService) -> FastAPI:
    app = FastAPI(title="vien translation service", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def malformed_request(request, exc):
        return JSONResponse(
            status_code=_ERROR_STATUS["INVALID_REQUEST"],
            content=_error_body("INVALID_REQUEST", str(exc.errors())),
        )

    @app.middleware("http")
    async def reject_nonlocal(request: Request, call_next):
        host = request.client.host if request.client else None
        if not service.peer_allowed(host):
            return JSONResponse(
                status_code=_ERROR_STATUS["NONLOCAL_FORBIDDEN"],
                content=_error_body(
                    "NONLOCAL_FORBIDDEN",
                    f"peer {host} is not loopback and allow_nonlocal is off",
                ),
            )
        return await call_next(request)

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "model": service.model_name,
            "quant_type": service.quant_type,
            "offline": True,
        }

    @app.post("/translate")
    def translate_endpoint(request: ApiTranslateRequest):
        try:
            direction = _parse_direction(service, request.direction)
        except ValueError as exc:
            return JSONResponse(
                status_code=_ERROR_STATUS["INVALID_REQUEST"],
                content=_error_body("INVALID_REQUEST", str(exc)),
            )
        try:
            turn = service.translate(request.text, direction)
        except Exception as exc:
            code, message = _classify(exc)
            return JSONResponse(
                status_code=_ERROR_STATUS[code],
                content=_error_body(code, message),
            )
        return _turn_response(turn)

    @app.websocket("/stream")
    async def stream_endpoint(ws: WebSocket):
        host = ws.client.host if ws.client else None
        if not service.peer_allowed(host):
            # Policy violation close code, mirroring HTTP 403.
            await ws.close(code=4403)
            return
        await ws.accept()
        try:
            while True:
                raw = await ws.receive_json()
                await _stream_one(service, ws, raw)
        except WebSocketDisconnect:
            pass

    return app


async def _stream_one(service: TranslationService, ws: WebSocket,
                      raw: dict) -> None:
    """Run one request, relaying fragments from the worker thread in order."""
    text = raw.get("text")
    if not isinstance(text, str):
        await ws.send_json(_error_body("INVALID_REQUEST", "text must be a string"))
        return
    try:
        direction = _parse_direction(service, raw.get("direction"))
    except ValueError as exc:
        await ws.send_json(_error_body("INVALID_REQUEST", str(exc)))
        return

    loop = asyncio.get_running_loop()
    events: asyncio.Queue = asyncio.Queue()

    def emit(item):
        loop.call_soon_threadsafe(events.put_nowait, item)

    def work():
        try:
            # Stream postprocessed increments, not raw decodes, so the
            # concatenated token events equal the final translation.
            scrubber = StreamScrubber(service.session.template)

            def relay(frag: str) -> None:
                delta = scrubber.feed(frag)
                if delta:
                    emit(("token", delta))

            turn = service.translate(text, direction, on_fragment=relay)
            tail = scrubber.flush(turn.output_text)
            if tail:
                emit(("token", tail))
            emit(("done", turn))
        except Exception as exc:  # relayed as a structured error event
            emit(("error", exc))

    worker = loop.run_in_executor(None, work)
    try:
        while True:
            kind, payload = await events.get()
            if kind == "token":
                await ws.send_json({"token": payload})
            elif kind == "done":
                response = _turn_response(payload)
                await ws.send_json({"done": True, **response.model_dump()})
                return
            else:
                code, message = _classify(payload)
                await ws.send_json(_error_body(code, message))
                return
    finally:
        await worker


def serve(config: ServiceConfig) -> None:
    """Load the model and block serving requests until interrupted."""
    import uvicorn

    service = service_from_config(config)
    app = create_app(service)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
