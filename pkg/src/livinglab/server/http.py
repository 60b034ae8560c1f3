"""HTTP API of the central server.

::

    POST /api/systems                 register (Bearer participant token)
    GET  /api/systems[?status=&task=] registry listing
    PUT  /api/systems/{id}/run        run-file upload (text body)
    GET  /api/systems/{id}/run        canonical run file of an accepted run
    POST /api/systems/{id}/status     {"status": ...} (Bearer admin token)
    POST /api/snapshots               app segment (Bearer app token when configured)
    GET  /api/report                  dashboard report (JSON)
    GET  /report.txt                  dashboard summary (text)
"""

from __future__ import annotations

from ..errors import AuthFailure, DuplicateSystemId, InvalidTransition, InvalidValue, UnknownSystem
from ..httpd import HttpError, HttpService, Request, Response, Router
from ..model import SystemRecord
from .core import CentralServer


def _errors(fn):
    def wrapped(req: Request, **kw) -> Response:
        try:
            return fn(req, **kw)
        except AuthFailure as exc:
            raise HttpError(401, str(exc)) from None
        except UnknownSystem as exc:
            raise HttpError(404, str(exc)) from None
        except (DuplicateSystemId, InvalidTransition) as exc:
            raise HttpError(409, str(exc), kind=type(exc).__name__) from None
        except InvalidValue as exc:
            raise HttpError(400, str(exc)) from None

    return wrapped


def build_router(server: CentralServer) -> Router:
    router = Router()

    @_errors
    def register(req: Request) -> Response:
        body = req.json()
        if not isinstance(body, dict):
            raise HttpError(400, "body must be a JSON object")
        body.setdefault("kind", "endpoint_backed" if body.get("endpoint") else "run_backed")
        if body["kind"] == "run_backed":
            body.setdefault("run_ref", body.get("system_id"))
        entry = server.register_system(SystemRecord.from_dict(body), req.bearer)
        return Response(201, entry.to_dict())

    @_errors
    def list_systems(req: Request) -> Response:
        return Response(200, server.list_systems(req.params.get("status"), req.params.get("task")))

    @_errors
    def upload_run(req: Request, system_id: str) -> Response:
        entry = server.upload_run(system_id, req.text(), req.bearer)
        accepted = bool(entry.report and entry.report.get("accepted"))
        return Response(200 if accepted else 422, entry.to_dict())

    @_errors
    def get_run(req: Request, system_id: str) -> Response:
        return Response(200, server.get_run(system_id), content_type="text/plain; charset=utf-8")

    @_errors
    def set_status(req: Request, system_id: str) -> Response:
        body = req.json() or {}
        try:
            entry = server.set_status(system_id, body.get("status"), req.bearer)
        except ValueError as exc:
            if isinstance(exc, InvalidValue):
                raise
            raise HttpError(400, str(exc)) from None
        return Response(200, entry.to_dict())

    @_errors
    def snapshots(req: Request) -> Response:
        body = req.json()
        if not isinstance(body, dict):
            raise HttpError(400, "body must be a JSON object")
        return Response(200, server.ingest_app_snapshot(body, req.bearer))

    def report(req: Request) -> Response:
        return Response(200, server.report_json().encode("utf-8"))

    def report_txt(req: Request) -> Response:
        return Response(200, server.report_text(), content_type="text/plain; charset=utf-8")

    router.add("POST", "/api/systems", register)
    router.add("GET", "/api/systems", list_systems)
    router.add("PUT", "/api/systems/{system_id}/run", upload_run)
    router.add("GET", "/api/systems/{system_id}/run", get_run)
    router.add("POST", "/api/systems/{system_id}/status", set_status)
    router.add("POST", "/api/snapshots", snapshots)
    router.add("GET", "/api/report", report)
    router.add("GET", "/report.txt", report_txt)
    return router


class ServerService(HttpService):
    def __init__(self, server: CentralServer, host: str = "127.0.0.1", port: int = 0):
        super().__init__(build_router(server), host, port, name="livinglab-server")
        self.server = server
