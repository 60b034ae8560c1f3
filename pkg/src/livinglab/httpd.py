"""Minimal JSON-over-HTTP plumbing on top of ``http.server``.

Handlers are plain callables ``handler(request, **path_params) -> Response``.
Each server runs in its own daemon thread; request handling is threaded.
"""

from __future__ import annotations

import json
import logging
import re
import socket
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Callable
from urllib.parse import parse_qs, urlsplit

logger = logging.getLogger(__name__)


@dataclass
class Request:
    method: str
    path: str
    params: dict[str, str]
    headers: dict[str, str]
    body: bytes = b""

    def json(self) -> Any:
        try:
            return json.loads(self.body.decode("utf-8") or "null")
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise HttpError(400, f"invalid JSON body: {exc}") from None

    def text(self) -> str:
        return self.body.decode("utf-8")

    @property
    def bearer(self) -> str | None:
        auth = self.headers.get("authorization", "")
        if auth.lower().startswith("bearer "):
            return auth[7:].strip()
        return None


@dataclass
class Response:
    status: int = 200
    body: Any = None
    content_type: str = "application/json"
    headers: dict[str, str] = field(default_factory=dict)

    def encode(self) -> bytes:
        if isinstance(self.body, bytes):
            return self.body
        if self.content_type.startswith("application/json"):
            return (json.dumps(self.body, sort_keys=True) + "\n").encode("utf-8")
        return str(self.body or "").encode("utf-8")


class HttpError(Exception):
    def __init__(self, status: int, message: str, **extra):
        super().__init__(message)
        self.status = status
        self.extra = extra


Handler = Callable[..., Response]


class Router:
    def __init__(self):
        self._routes: list[tuple[str, re.Pattern, Handler]] = []

    def add(self, method: str, pattern: str, handler: Handler) -> None:
        regex = re.sub(r"\{(\w+)\}", r"(?P<\1>[^/]+)", pattern)
        self._routes.append((method, re.compile(f"^{regex}$"), handler))

    def dispatch(self, req: Request) -> Response:
        allowed = False
        for method, regex, handler in self._routes:
            m = regex.match(req.path)
            if not m:
                continue
            if method != req.method:
                allowed = True
                continue
            return handler(req, **m.groupdict())
        if allowed:
            raise HttpError(405, f"{req.method} not allowed on {req.path}")
        raise HttpError(404, f"no route for {req.path}")


def _make_handler(router: Router, name: str):
    class _Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def setup(self):
            super().setup()
            # headers and body go out in separate writes; without this, Nagle
            # plus delayed ACKs stall every keep-alive response by ~40 ms
            self.connection.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        server_version = name

        def _handle(self, method: str) -> None:
            parts = urlsplit(self.path)
            params = {k: v[-1] for k, v in parse_qs(parts.query, keep_blank_values=True).items()}
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length) if length else b""
            req = Request(
                method,
                parts.path,
                params,
                {k.lower(): v for k, v in self.headers.items()},
                body,
            )
            try:
                resp = router.dispatch(req)
            except HttpError as exc:
                resp = Response(exc.status, {"error": str(exc), **exc.extra})
            except Exception as exc:  # keep the server alive
                logger.exception("unhandled error on %s %s", method, self.path)
                resp = Response(500, {"error": f"{type(exc).__name__}: {exc}"})
            payload = resp.encode()
            try:
                self.send_response(resp.status)
                self.send_header("Content-Type", resp.content_type)
                self.send_header("Content-Length", str(len(payload)))
                for k, v in resp.headers.items():
                    self.send_header(k, v)
                self.end_headers()
                self.wfile.write(payload)
            except (BrokenPipeError, ConnectionResetError):
                # client gave up (e.g. its deadline expired)
                pass

        def do_GET(self):
            self._handle("GET")

        def do_POST(self):
            self._handle("POST")

        def do_PUT(self):
            self._handle("PUT")

        def log_message(self, fmt, *args):
            logger.debug("%s - %s", self.address_string(), fmt % args)

    return _Handler


class HttpService:
    """An HTTP server bound to ``host:port`` (port 0 picks a free port)."""

    def __init__(self, router: Router, host: str = "127.0.0.1", port: int = 0, name: str = "livinglab"):
        self.httpd = ThreadingHTTPServer((host, port), _make_handler(router, name))
        self.httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "HttpService":
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def stop(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "HttpService":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
