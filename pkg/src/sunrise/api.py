"""REST Evaluation API: the HTTP face of the Runtime Manager.

All endpoints live under /v1 and answer either their documented 2xx shape or
an error body {"code", "message", "detail"} with a code from the closed set
in errors.ERROR_CODES. Build and run are asynchronous: they return 202 and
progress is observed through the status endpoint.
"""
from __future__ import annotations

import logging
from contextlib import asynccontextmanager
from typing import Any

from fastapi import Depends, FastAPI, File, Form, Request, Response, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel
from starlette.exceptions import HTTPException as StarletteHTTPException

from . import sysdef as sd
from .config import ServiceConfig
from .errors import (
    FileParamInlineValueError,
    KindMismatchError,
    SchemaError,
    SunriseError,
    UnauthorizedError,
    UnknownParameterError,
)
from .manager import RuntimeManager

logger = logging.getLogger("sunrise.api")

# Declared result type tag -> response content type.
CONTENT_TYPES = {
    "json": "application/json",
    "txt": "text/plain",
    "vcd": "application/octet-stream",
}


class SystemRef(BaseModel):
    name: str
    version: str


class CreateSessionRequest(BaseModel):
    system: SystemRef
    build_parameters: dict[str, Any] = {}
    run_parameters: dict[str, Any] = {}
    description: str = ""


class BuildRequest(BaseModel):
    timeout_s: float | None = None


class RunRequest(BaseModel):
    timeout_s: float | None = None
    run_parameters: dict[str, Any] = {}


class SetParametersRequest(BaseModel):
    parameters: dict[str, Any]


def _error_response(status: int, code: str, message: str, detail: Any = None) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "detail": detail},
    )


def _experiment_summary(exp) -> dict[str, Any]:
    return {
        "experiment_id": exp.id,
        "meta": {
            "creator": exp.creator,
            "created_at": exp.created_at,
            "description": exp.description,
            "status": exp.state.value,
        },
        "system": {"name": exp.system_name, "version": exp.system_version},
    }


def create_app(config: ServiceConfig, manager: RuntimeManager | None = None) -> FastAPI:
    rm = manager if manager is not None else RuntimeManager(config)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        rm.close()

    app = FastAPI(
        title="SUNRISE Evaluation API",
        version="1",
        openapi_url="/v1/openapi.json",
        docs_url="/v1/docs",
        redoc_url=None,
        lifespan=lifespan,
    )
    app.state.manager = rm

    def auth_guard(request: Request) -> None:
        if config.auth_token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {config.auth_token}":
            raise UnauthorizedError("missing or invalid bearer token")

    def creator_of(request: Request) -> str:
        return request.headers.get("x-sunrise-user") or "anonymous"

    guarded = [Depends(auth_guard)]

    # -- error handling ---------------------------------------------------

    @app.exception_handler(SunriseError)
    async def sunrise_error_handler(request: Request, exc: SunriseError):
        return _error_response(exc.http_status, exc.code, exc.message, exc.detail or None)

    @app.exception_handler(RequestValidationError)
    async def validation_error_handler(request: Request, exc: RequestValidationError):
        return _error_response(422, "validation_failed", "request body validation failed", exc.errors())

    @app.exception_handler(StarletteHTTPException)
    async def http_exception_handler(request: Request, exc: StarletteHTTPException):
        code = "internal" if exc.status_code >= 500 else "validation_failed"
        return _error_response(exc.status_code, code, str(exc.detail))

    @app.exception_handler(Exception)
    async def unhandled_exception_handler(request: Request, exc: Exception):
        logger.exception("unhandled error on %s %s", request.method, request.url.path)
        return _error_response(500, "internal", f"{type(exc).__name__}: {exc}")

    # -- catalog -----------------------------------------------------------

    @app.get("/v1/systems", dependencies=guarded)
    def list_systems() -> list[dict[str, str]]:
        return [
            {
                "name": entry.sysdef.name,
                "version": entry.sysdef.version,
                "summary": entry.sysdef.documentation.summary,
            }
            for entry in rm.catalog.entries
        ]

    @app.get("/v1/systems/{name}/{version}", dependencies=guarded)
    def get_system(name: str, version: str) -> dict[str, Any]:
        return sd.sysdef_to_wire(rm.get_system(name, version))

    # -- sessions ------------------------------------------------------------

    @app.post("/v1/session", status_code=201, dependencies=guarded)
    def create_session(body: CreateSessionRequest, request: Request, response: Response):
        try:
            exp = rm.create(
                body.system.name,
                body.system.version,
                build_overrides=body.build_parameters,
                run_overrides=body.run_parameters,
                creator=creator_of(request),
                description=body.description,
            )
        except (UnknownParameterError, KindMismatchError, FileParamInlineValueError) as exc:
            # At creation time every parameter problem is a body validation failure.
            raise SchemaError(exc.message, exc.detail) from exc
        response.headers["Location"] = f"/v1/session/{exp.id}"
        return {"experiment_id": exp.id}

    @app.get("/v1/session", dependencies=guarded)
    def list_sessions(creator: str | None = None, status: str | None = None):
        return [_experiment_summary(e) for e in rm.list_experiments(creator, status)]

    @app.post("/v1/session/{session_id}/parameter", status_code=204, dependencies=guarded)
    def upload_parameter(session_id: str, name: str = Form(...), file: UploadFile = File(...)):
        content = file.file.read()
        rm.upload_parameter(session_id, name, content)
        return Response(status_code=204)

    @app.post("/v1/session/{session_id}/parameters", dependencies=guarded)
    def set_parameters(session_id: str, body: SetParametersRequest):
        exp = rm.set_parameters(session_id, body.parameters)
        return {"status": exp.state.value}

    @app.post("/v1/session/{session_id}/build", dependencies=guarded)
    def build_session(session_id: str, body: BuildRequest | None = None):
        exp = rm.get_experiment(session_id)
        if not exp.sysdef_snapshot.has_build_step:
            exp = rm.start_build(session_id)
            return JSONResponse(status_code=200, content={"status": exp.state.value})
        timeout_s = body.timeout_s if body else None
        rm.start_build(session_id, timeout_s=timeout_s)
        return JSONResponse(status_code=202, content={"status": "building"})

    @app.post("/v1/session/{session_id}/run", dependencies=guarded)
    def run_session(session_id: str, body: RunRequest | None = None):
        timeout_s = body.timeout_s if body else None
        overrides = body.run_parameters if body else {}
        try:
            rm.start_run(session_id, timeout_s=timeout_s, run_overrides=overrides)
        except UnknownParameterError as exc:
            exc.http_status = 422  # body problem, not a missing resource
            raise
        return JSONResponse(status_code=202, content={"status": "running"})

    @app.get("/v1/session/{session_id}/status", dependencies=guarded)
    def session_status(session_id: str):
        return JSONResponse(
            content=rm.get_status(session_id), headers={"Cache-Control": "no-store"}
        )

    @app.get("/v1/session/{session_id}/log", dependencies=guarded)
    def session_log(session_id: str):
        return PlainTextResponse(rm.get_log(session_id))

    @app.get("/v1/session/{session_id}/result/{name}", dependencies=guarded)
    def fetch_result(session_id: str, name: str):
        path, type_tag = rm.get_result(session_id, name)
        return FileResponse(
            path,
            media_type=CONTENT_TYPES.get(type_tag, "application/octet-stream"),
            filename=name,
        )

    @app.post("/v1/session/{session_id}/archive", dependencies=guarded)
    def archive_session(session_id: str):
        rm.archive(session_id)
        return {"archive_url": f"/v1/session/{session_id}/archive"}

    @app.get("/v1/session/{session_id}/archive", dependencies=guarded)
    def download_archive(session_id: str):
        path = rm.archive_file(session_id)
        return FileResponse(path, media_type="application/zip", filename=f"{session_id}.zip")

    @app.delete("/v1/session/{session_id}", status_code=204, dependencies=guarded)
    def delete_session(session_id: str):
        rm.delete(session_id)
        return Response(status_code=204)

    if config.ui_dir is not None and config.ui_dir.is_dir():
        app.mount("/ui", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app
