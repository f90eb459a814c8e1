"""HTTP facade over one store: thin adapters from endpoints to library calls.

Every response is an envelope, `{"status": "ok", "payload": ...}` or
`{"status": "error", "error": {...}}`, encoded with the same canonical
JSON writer the journal uses so payloads are byte-identical to the
library results they wrap.
"""

from __future__ import annotations

import os
import socket
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request, Response

from .errors import DomainError, ErrorCode, RunValidationError
from .queries import (
    _resolve_pointer,
    forward_trace,
    history,
    recent,
    review,
    review_to_dict,
    stale_components,
    stale_to_dict,
    summary_to_dict,
    tag_query,
    trace,
    trace_to_dict,
)
from .records import alert_to_dict, canonical_dumps, loads_strict, pointer_to_dict, run_to_dict, spec_from_dict, spec_to_dict
from .store import Store

ADDR_ENV = "LINEATRACE_ADDR"
DEFAULT_ADDR = "127.0.0.1:8421"

_NOT_FOUND = frozenset(
    {ErrorCode.UNKNOWN_COMPONENT, ErrorCode.UNKNOWN_POINTER, ErrorCode.UNKNOWN_RUN, ErrorCode.NO_PRODUCER}
)
_SERVER_SIDE = frozenset({ErrorCode.STORE_IO, ErrorCode.INTERNAL, ErrorCode.BIND_FAILURE})


def status_for(code: ErrorCode) -> int:
    if code in _NOT_FOUND:
        return 404
    if code is ErrorCode.NONEMPTY_TARGET:
        return 409
    if code in _SERVER_SIDE:
        return 500
    return 400


def envelope_ok(payload: Any) -> dict[str, Any]:
    return {"status": "ok", "payload": payload}


def envelope_error(code: ErrorCode, message: str, violations: list[tuple[ErrorCode, str]] | None = None) -> dict[str, Any]:
    error: dict[str, Any] = {"code": code.value, "message": message}
    if violations is not None:
        error["violations"] = [{"code": c.value, "message": m} for c, m in violations]
    return {"status": "error", "error": error}


def _respond(doc: dict[str, Any], status: int = 200) -> Response:
    return Response(content=canonical_dumps(doc), status_code=status, media_type="application/json")


def _error_response(exc: DomainError) -> Response:
    if isinstance(exc, RunValidationError):
        # A rejected submission is the client's document at fault, not a
        # missing URL resource, even when a violation names something unknown.
        return _respond(envelope_error(exc.code, exc.message, exc.violations), 400)
    return _respond(envelope_error(exc.code, exc.message), status_for(exc.code))


async def _read_body(request: Request) -> dict[str, Any]:
    raw = await request.body()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise DomainError(ErrorCode.BAD_REQUEST, "request body is not valid UTF-8") from None
    if not text.strip():
        raise DomainError(ErrorCode.BAD_REQUEST, "request body is empty")
    return loads_strict(text)


def _int_param(value: str | None, name: str, default: int) -> int:
    if value is None:
        return default
    try:
        return int(value)
    except ValueError:
        raise DomainError(ErrorCode.BAD_REQUEST, f"{name} must be an integer, got {value!r}") from None


def _version_param(value: str | None) -> int | None:
    if value is None:
        return None
    try:
        return int(value)
    except ValueError:
        raise DomainError(ErrorCode.BAD_REQUEST, f"version must be an integer, got {value!r}") from None


def create_app(store: Store, ui_dir: str | Path | None = None) -> FastAPI:
    """Build the application for one already-open store."""
    app = FastAPI(title="lineatrace", docs_url=None, redoc_url=None, openapi_url=None)

    @app.exception_handler(DomainError)
    async def _domain_error(request: Request, exc: DomainError) -> Response:
        return _error_response(exc)

    @app.exception_handler(Exception)
    async def _unexpected_error(request: Request, exc: Exception) -> Response:
        doc = envelope_error(ErrorCode.INTERNAL, f"{type(exc).__name__}: {exc}")
        return _respond(doc, 500)

    @app.put("/components")
    async def put_component(request: Request) -> Response:
        spec = spec_from_dict(await _read_body(request))
        replacing = spec.name in store.snapshot().specs
        store.register_component(spec)
        return _respond(envelope_ok(spec_to_dict(store.get_spec(spec.name))), 200 if replacing else 201)

    @app.post("/runs")
    async def post_run(request: Request) -> Response:
        run, created = store.log_component_run(await _read_body(request))
        return _respond(envelope_ok(run_to_dict(run)), 201 if created else 200)

    @app.get("/runs/recent")
    def get_recent(limit: str | None = None) -> Response:
        entries = recent(store, _int_param(limit, "limit", 20))
        return _respond(envelope_ok([summary_to_dict(e) for e in entries]))

    @app.get("/runs/{run_id}")
    def get_run(run_id: str) -> Response:
        try:
            parsed = int(run_id)
        except ValueError:
            raise DomainError(ErrorCode.BAD_REQUEST, f"run id must be an integer, got {run_id!r}") from None
        return _respond(envelope_ok(run_to_dict(store.get_run(parsed))))

    @app.get("/components/{name}/history")
    def get_history(name: str, limit: str | None = None) -> Response:
        entries = history(store, name, _int_param(limit, "limit", 10))
        return _respond(envelope_ok([summary_to_dict(e) for e in entries]))

    @app.get("/trace")
    def get_trace(name: str | None = None, version: str | None = None) -> Response:
        if name is None:
            raise DomainError(ErrorCode.BAD_REQUEST, "query parameter 'name' is required")
        return _respond(envelope_ok(trace_to_dict(trace(store, name, _version_param(version)))))

    @app.get("/trace/forward")
    def get_forward_trace(name: str | None = None, version: str | None = None) -> Response:
        if name is None:
            raise DomainError(ErrorCode.BAD_REQUEST, "query parameter 'name' is required")
        return _respond(envelope_ok(trace_to_dict(forward_trace(store, name, _version_param(version)))))

    def _flag_target(body: dict[str, Any]) -> tuple[str, int]:
        name = body.get("name")
        if not isinstance(name, str) or not name:
            raise DomainError(ErrorCode.BAD_REQUEST, "flag body needs a pointer 'name'")
        version = body.get("version")
        if version is None:
            return name, _resolve_pointer(store.snapshot(), name, None).version
        if not isinstance(version, int) or isinstance(version, bool) or version < 1:
            raise DomainError(ErrorCode.BAD_REQUEST, "flag 'version' must be a positive integer")
        return name, version

    @app.post("/flags")
    async def post_flag(request: Request) -> Response:
        name, version = _flag_target(await _read_body(request))
        return _respond(envelope_ok(pointer_to_dict(store.set_flag(name, version))))

    @app.delete("/flags")
    async def delete_flag(request: Request) -> Response:
        name, version = _flag_target(await _read_body(request))
        return _respond(envelope_ok(pointer_to_dict(store.clear_flag(name, version))))

    @app.get("/review")
    def get_review() -> Response:
        return _respond(envelope_ok(review_to_dict(review(store))))

    @app.get("/stale")
    def get_stale() -> Response:
        return _respond(envelope_ok(stale_to_dict(stale_components(store))))

    @app.get("/tags/{tag}")
    def get_tag(tag: str) -> Response:
        return _respond(envelope_ok([spec_to_dict(s) for s in tag_query(store, tag)]))

    @app.get("/alerts")
    def get_alerts() -> Response:
        return _respond(envelope_ok([alert_to_dict(a) for a in store.alerts()]))

    @app.get("/healthz")
    def get_healthz() -> Response:
        return _respond(envelope_ok({"journal_position": store.journal_position}))

    ui_path = Path(ui_dir) if ui_dir is not None else Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if ui_path.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_path, html=True), name="ui")

    return app


def resolve_addr(flag_value: str | None = None) -> str:
    """Flag wins, then the LINEATRACE_ADDR environment variable, then default."""
    if flag_value:
        return flag_value
    return os.environ.get(ADDR_ENV) or DEFAULT_ADDR


def parse_listen(text: str) -> tuple[str, int]:
    host, sep, port_text = text.rpartition(":")
    if not sep or not host:
        raise DomainError(ErrorCode.BAD_REQUEST, f"listen address must be host:port, got {text!r}")
    try:
        port = int(port_text)
    except ValueError:
        raise DomainError(ErrorCode.BAD_REQUEST, f"listen port must be an integer, got {port_text!r}") from None
    if not 0 <= port <= 65535:
        raise DomainError(ErrorCode.BAD_REQUEST, f"listen port out of range: {port}")
    return host, port


def serve(store: Store, listen: str | None = None, ui_dir: str | Path | None = None, log_level: str = "warning") -> None:
    """Bind and serve until interrupted. Raises BIND_FAILURE, never exits."""
    import uvicorn

    host, port = parse_listen(resolve_addr(listen))
    try:
        sock = socket.create_server((host, port))
    except OSError as exc:
        raise DomainError(ErrorCode.BIND_FAILURE, f"cannot bind {host}:{port}: {exc}") from exc
    app = create_app(store, ui_dir)
    config = uvicorn.Config(app, log_level=log_level)
    server = uvicorn.Server(config)
    try:
        server.run(sockets=[sock])
    finally:
        sock.close()
