"""Client side of the external-system wire protocol.

An endpoint-backed system answers::

    GET /ranking?query=<text>&qid=<id>         -> {"itemlist": [docid, ...]}
    GET /recommendation/datasets?item_id=<id>  -> {"itemlist": [docid, ...]}
    GET /test                                  -> any 2xx when alive

Every call has a hard deadline; there are no retries.
"""

from __future__ import annotations

import threading
import time
from typing import Any, Callable, Mapping, Protocol

import httpx

from ..errors import DuplicateDoc, EmptyRanking, EndpointTimeout, InvalidValue, MalformedResponse, OutOfCandidates, SystemCallError
from ..model import Ranking, SystemKind, SystemRecord, Task, validate_ranking
from ..runs import CandidateList

DEFAULT_DEADLINE_MS = 800


class Transport(Protocol):
    def __call__(self, url: str, params: Mapping[str, str], timeout_s: float) -> tuple[int, Any]:
        """Issue a GET and return ``(status, decoded JSON body)``."""


class HttpxTransport:
    """Real network transport; one pooled client shared across threads."""

    def __init__(self, client: httpx.Client | None = None):
        self._client = client or httpx.Client()

    def __call__(self, url, params, timeout_s):
        try:
            resp = self._client.get(url, params=dict(params), timeout=httpx.Timeout(timeout_s))
        except httpx.TimeoutException as exc:
            raise EndpointTimeout(f"{url}: {type(exc).__name__}") from None
        except httpx.HTTPError as exc:
            raise SystemCallError(f"{url}: {exc}") from None
        try:
            body = resp.json()
        except ValueError:
            body = None
        return resp.status_code, body

    def close(self) -> None:
        self._client.close()


def _items(status: int, body: Any) -> list[str]:
    if status != 200:
        raise SystemCallError(f"system answered HTTP {status}")
    if not isinstance(body, dict) or not isinstance(body.get("itemlist"), list):
        raise MalformedResponse("response lacks an 'itemlist' array")
    items = body["itemlist"]
    if not all(isinstance(x, str) for x in items):
        raise MalformedResponse("itemlist entries must be strings")
    return items


class EndpointClient:
    """Calls one system endpoint under a deadline measured end to end."""

    def __init__(
        self,
        base_url: str,
        deadline_ms: int = DEFAULT_DEADLINE_MS,
        transport: Transport | None = None,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.base_url = base_url.rstrip("/")
        self.deadline_ms = deadline_ms
        self.transport = transport or HttpxTransport()
        self.clock = clock

    def _get(self, path: str, params: Mapping[str, str]) -> tuple[int, Any]:
        start = self.clock()
        result = self.transport(self.base_url + path, params, self.deadline_ms / 1000)
        elapsed_ms = (self.clock() - start) * 1000
        if elapsed_ms > self.deadline_ms:
            raise EndpointTimeout(f"{self.base_url}{path}: {elapsed_ms:.0f} ms > {self.deadline_ms} ms")
        return result

    def ranking(self, query_text: str | None, qid: str | None) -> list[str]:
        params = {}
        if query_text is not None:
            params["query"] = query_text
        if qid is not None:
            params["qid"] = qid
        return _items(*self._get("/ranking", params))

    def recommendation(self, item_id: str) -> list[str]:
        return _items(*self._get("/recommendation/datasets", {"item_id": item_id}))

    def alive(self) -> bool:
        try:
            status, _ = self._get("/test", {})
        except SystemCallError:
            return False
        return 200 <= status < 300


def query_endpoint_system(
    sys: SystemRecord,
    context: str,
    client: EndpointClient,
    query_text: str | None = None,
    candidates: CandidateList | None = None,
) -> Ranking:
    """Fetch and validate one ranking from an endpoint-backed system.

    Raises ``EndpointTimeout``, ``MalformedResponse`` or ``OutOfCandidates``;
    callers treat all of them as a reason to fall back.
    """
    if sys.task is Task.ADHOC:
        items = client.ranking(query_text, context)
    else:
        items = client.recommendation(context)
    ranking = Ranking(context, tuple(items), sys.system_id)
    try:
        validate_ranking(ranking)
    except (DuplicateDoc, EmptyRanking, InvalidValue) as exc:
        raise MalformedResponse(str(exc)) from None
    if candidates is not None:
        allowed = candidates.as_set
        outside = [d for d in ranking.items if d not in allowed]
        if outside:
            raise OutOfCandidates(outside)
    return ranking


class ClientPool:
    """One ``EndpointClient`` per endpoint URL, created lazily."""

    def __init__(self, deadline_ms: int, transport: Transport | None = None, clock=time.monotonic):
        self.deadline_ms = deadline_ms
        self.transport = transport or HttpxTransport()
        self.clock = clock
        self._clients: dict[str, EndpointClient] = {}
        self._lock = threading.Lock()

    def get(self, url: str) -> EndpointClient:
        with self._lock:
            client = self._clients.get(url)
            if client is None:
                client = EndpointClient(url, self.deadline_ms, self.transport, self.clock)
                self._clients[url] = client
            return client


def is_endpoint(sys: SystemRecord) -> bool:
    return sys.kind is SystemKind.ENDPOINT_BACKED or (sys.kind is SystemKind.BASELINE and bool(sys.endpoint))
