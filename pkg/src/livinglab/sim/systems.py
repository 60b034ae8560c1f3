"""Reference ranking systems and stubs speaking the system-endpoint protocol."""

from __future__ import annotations

import random
import threading
import time
from typing import Callable, Iterable, Mapping

from ..errors import EndpointTimeout, SystemCallError
from ..httpd import HttpError, HttpService, Request, Response, Router
from .world import SyntheticWorld

RankFn = Callable[[str], list[str]]


def candidate_order(world: SyntheticWorld) -> RankFn:
    def rank(context: str) -> list[str]:
        return list(world.candidates[context].candidates)

    return rank


def shuffled_ranker(world: SyntheticWorld, seed: int) -> RankFn:
    """A fixed pseudo-random order per context, uninformed by relevance."""

    def rank(context: str) -> list[str]:
        docs = list(world.candidates[context].candidates)
        random.Random(f"shuffle:{seed}:{context}").shuffle(docs)
        return docs

    return rank


def relevance_ranker(world: SyntheticWorld, seed: int = 0) -> RankFn:
    """Sorts by hidden grade, so every relevant document precedes every irrelevant one."""
    shuffle = shuffled_ranker(world, seed)

    def rank(context: str) -> list[str]:
        return sorted(shuffle(context), key=lambda d: -world.grade(context, d))

    return rank


def noisy_ranker(world: SyntheticWorld, seed: int, noise: float = 1.0) -> RankFn:
    """Grade plus Gaussian noise; better than random, worse than the oracle ordering."""

    def rank(context: str) -> list[str]:
        rng = random.Random(f"noisy:{seed}:{context}")
        docs = world.candidates[context].candidates
        keyed = [(world.grade(context, d) + rng.gauss(0.0, noise), d) for d in docs]
        return [d for _, d in sorted(keyed, key=lambda p: (-p[0], p[1]))]

    return rank


def make_run(rank_fn: RankFn, contexts: Iterable[str], tag: str, depth: int | None = None) -> str:
    """Render a system's rankings as a run file (scores strictly decreasing)."""
    lines = []
    for context in contexts:
        docs = rank_fn(context)[:depth]
        n = len(docs)
        for i, doc in enumerate(docs, start=1):
            lines.append(f"{context} Q0 {doc} {i} {float(n - i + 1)!r} {tag}")
    return "\n".join(lines) + "\n"


class StubSystem:
    """An external system answering the endpoint protocol from a ranking function.

    ``delay`` (seconds, or a callable returning seconds per call) simulates
    slow systems; ``handle`` can be mounted on HTTP or called in-process.
    """

    def __init__(self, name: str, rank_fn: RankFn, delay: float | Callable[[], float] = 0.0):
        self.name = name
        self.rank_fn = rank_fn
        self.delay = delay
        self.calls = 0
        self._lock = threading.Lock()

    def next_delay(self) -> float:
        with self._lock:
            self.calls += 1
            return self.delay() if callable(self.delay) else self.delay

    def answer(self, path: str, params: Mapping[str, str]) -> tuple[int, dict]:
        if path == "/test":
            return 200, {"status": "ok", "system": self.name}
        if path == "/ranking":
            context = params.get("qid")
        elif path == "/recommendation/datasets":
            context = params.get("item_id")
        else:
            return 404, {"error": f"no route {path}"}
        try:
            return 200, {"itemlist": self.rank_fn(context)}
        except KeyError:
            return 404, {"error": f"unknown context {context!r}"}

    def router(self) -> Router:
        router = Router()

        def handler(req: Request) -> Response:
            delay = self.next_delay()
            if delay:
                time.sleep(delay)
            status, body = self.answer(req.path, req.params)
            if status != 200:
                raise HttpError(status, body["error"])
            return Response(status, body)

        for path in ("/test", "/ranking", "/recommendation/datasets"):
            router.add("GET", path, handler)
        return router

    def service(self, host: str = "127.0.0.1", port: int = 0) -> HttpService:
        return HttpService(self.router(), host, port, name=f"stub-{self.name}")


class LocalTransport:
    """In-process transport routing endpoint URLs to ``StubSystem`` objects.

    Delays are simulated against the deadline instead of slept: a call whose
    delay exceeds the timeout raises ``EndpointTimeout`` immediately.
    """

    def __init__(self, systems: Mapping[str, StubSystem] | None = None):
        self.systems: dict[str, StubSystem] = dict(systems or {})

    def mount(self, base_url: str, system: StubSystem) -> None:
        self.systems[base_url.rstrip("/")] = system

    def __call__(self, url: str, params, timeout_s: float):
        for base, system in self.systems.items():
            if url.startswith(base + "/"):
                delay = system.next_delay()
                if delay > timeout_s:
                    raise EndpointTimeout(f"{url}: simulated {delay * 1000:.0f} ms")
                return system.answer(url[len(base):], params)
        raise SystemCallError(f"no route to {url}")


class FaultInjector:
    """Seeded per-call delay schedule: ``rate`` of calls take ``slow_s`` seconds."""

    def __init__(self, rate: float, slow_s: float, seed: int = 0, fast_s: float = 0.0):
        self.rate = rate
        self.slow_s = slow_s
        self.fast_s = fast_s
        self._rng = random.Random(seed)
        self._lock = threading.Lock()
        self.faults = 0

    def __call__(self) -> float:
        with self._lock:
            if self._rng.random() < self.rate:
                self.faults += 1
                return self.slow_s
            return self.fast_s
