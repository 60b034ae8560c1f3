"""HTTP front end of the site app.

Public API (JSON)::

    GET  /ranking?query_id=&query=&session_id=&page_size=[&ts=]
    GET  /recommendation/datasets?item_id=&session_id=&k=[&ts=]
    POST /feedback            FeedbackEvent body
    GET  /healthz

``ts`` optionally carries the host portal's request time (ms since epoch).
Operator endpoint: ``POST /admin/flush`` cuts a segment and pushes pending
segments to the central server.
"""

from __future__ import annotations

import logging
import threading

from ..errors import InvalidEvent, InvalidValue, NoBaseline, UnknownClickedDoc, UnknownImpression
from ..httpd import HttpError, HttpService, Request, Response, Router
from ..model import FeedbackEvent
from .core import RankingRequest, RecommendationRequest, SiteApp

logger = logging.getLogger(__name__)


def _int(params: dict, name: str, default=None):
    raw = params.get(name)
    if raw in (None, ""):
        return default
    try:
        return int(raw)
    except ValueError:
        raise HttpError(400, f"parameter {name!r} must be an integer") from None


def build_router(app: SiteApp, server=None) -> Router:
    router = Router()

    def ranking(req: Request) -> Response:
        p = req.params
        try:
            payload = app.handle_ranking(
                RankingRequest(
                    session_id=p.get("session_id", ""),
                    query_id=p.get("query_id") or None,
                    query_text=p.get("query") or None,
                    page_size=_int(p, "page_size"),
                    ts=_int(p, "ts"),
                )
            )
        except InvalidValue as exc:
            raise HttpError(400, str(exc)) from None
        except NoBaseline as exc:
            raise HttpError(503, str(exc)) from None
        return Response(200, payload)

    def recommendation(req: Request) -> Response:
        p = req.params
        try:
            payload = app.handle_recommendation(
                RecommendationRequest(
                    seed_id=p.get("item_id", ""),
                    session_id=p.get("session_id", ""),
                    requested_k=_int(p, "k", 0),
                    ts=_int(p, "ts"),
                )
            )
        except InvalidValue as exc:
            raise HttpError(400, str(exc)) from None
        return Response(200, payload)

    def feedback(req: Request) -> Response:
        body = req.json()
        if not isinstance(body, dict):
            raise HttpError(400, "feedback body must be a JSON object")
        try:
            ack = app.record_feedback(FeedbackEvent.from_dict(body))
        except UnknownImpression as exc:
            raise HttpError(404, str(exc)) from None
        except (UnknownClickedDoc, InvalidEvent, InvalidValue) as exc:
            raise HttpError(400, str(exc), kind=type(exc).__name__) from None
        return Response(200, ack)

    def healthz(req: Request) -> Response:
        return Response(200, app.healthz())

    def flush(req: Request) -> Response:
        if server is None:
            seg = app.cut_segment()
            return Response(200, {"pushed": 0, "cut": seg is not None})
        return Response(200, {"pushed": app.push_snapshots(server)})

    router.add("GET", "/ranking", ranking)
    router.add("GET", "/recommendation/datasets", recommendation)
    router.add("POST", "/feedback", feedback)
    router.add("GET", "/healthz", healthz)
    router.add("POST", "/admin/flush", flush)
    return router


class AppService(HttpService):
    """Site app served over HTTP, with an optional periodic snapshot pusher."""

    def __init__(self, app: SiteApp, server=None, host: str = "127.0.0.1", port: int = 0,
                 push_interval_s: float | None = None):
        super().__init__(build_router(app, server), host, port, name="livinglab-app")
        self.app = app
        self.server = server
        self.push_interval_s = push_interval_s
        self._stop = threading.Event()
        self._pusher: threading.Thread | None = None

    def _push_loop(self) -> None:
        while not self._stop.wait(self.push_interval_s):
            try:
                self.app.push_snapshots(self.server)
            except Exception as exc:  # server unreachable: keep segments for the next try
                logger.warning("snapshot push failed: %s", exc)

    def start(self) -> "AppService":
        super().start()
        if self.server is not None and self.push_interval_s:
            self._pusher = threading.Thread(target=self._push_loop, daemon=True)
            self._pusher.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        if self._pusher is not None:
            self._pusher.join(timeout=5)
        super().stop()
