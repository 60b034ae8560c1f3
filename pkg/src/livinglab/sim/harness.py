"""Simulated traffic against the site app, in-process or over HTTP.

All randomness flows from one campaign seed: session ``i`` draws from
``numpy.random.default_rng([seed, i])``, and every timestamp comes from a
simulated clock, so a campaign replays byte-for-byte.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Protocol

import httpx
import numpy as np

from ..app import AppConfig, SiteApp
from ..app.core import RankingRequest, RecommendationRequest
from ..app.endpoint import EndpointClient
from ..app.http import AppService
from ..eventlog import EventLog
from ..model import EventKind, FeedbackEvent, SystemKind, SystemRecord, Task
from ..server import CentralServer, LocalServerClient, ServerClient, ServerConfig
from ..server.http import ServerService
from .clickmodel import ClickModel
from .systems import (
    LocalTransport,
    StubSystem,
    make_run,
    noisy_ranker,
    relevance_ranker,
    shuffled_ranker,
)
from .world import SyntheticWorld, generate_world

logger = logging.getLogger(__name__)

EPOCH_MS = 1_609_459_200_000  # 2021-01-01T00:00:00Z


class AppClient(Protocol):
    def rank(self, query_id, query_text, session_id, page_size, ts) -> dict: ...
    def recommend(self, seed_id, session_id, k, ts) -> dict: ...
    def feedback(self, event: FeedbackEvent) -> dict: ...


class InProcessAppClient:
    def __init__(self, app: SiteApp):
        self.app = app

    def rank(self, query_id, query_text, session_id, page_size, ts):
        return self.app.handle_ranking(RankingRequest(session_id, query_id, query_text, page_size, ts))

    def recommend(self, seed_id, session_id, k, ts):
        return self.app.handle_recommendation(RecommendationRequest(seed_id, session_id, k, ts))

    def feedback(self, event):
        return self.app.record_feedback(event)


class HttpAppClient:
    def __init__(self, base_url: str, timeout_s: float = 10.0):
        self._http = httpx.Client(base_url=base_url.rstrip("/"), timeout=timeout_s)

    def _get(self, path, params):
        resp = self._http.get(path, params={k: v for k, v in params.items() if v is not None})
        resp.raise_for_status()
        return resp.json()

    def rank(self, query_id, query_text, session_id, page_size, ts):
        return self._get(
            "/ranking",
            {"query_id": query_id, "query": query_text, "session_id": session_id,
             "page_size": page_size, "ts": ts},
        )

    def recommend(self, seed_id, session_id, k, ts):
        return self._get(
            "/recommendation/datasets",
            {"item_id": seed_id, "session_id": session_id, "k": k, "ts": ts},
        )

    def feedback(self, event):
        resp = self._http.post("/feedback", json=event.to_dict())
        resp.raise_for_status()
        return resp.json()

    def flush(self) -> dict:
        resp = self._http.post("/admin/flush")
        resp.raise_for_status()
        return resp.json()

    def close(self):
        self._http.close()


@dataclass(frozen=True)
class Behaviour:
    """User behaviour around clicks. Times are milliseconds."""

    bounce_probs: tuple[float, float, float] = (0.7, 0.3, 0.1)
    vote_prob: float = 0.3
    max_requests: int = 2
    page_size: int = 10
    requested_k: int = 5
    dwell_threshold_ms: int = 10_000


def simulate_session(
    world: SyntheticWorld,
    model: ClickModel,
    client: AppClient,
    task: Task,
    session_id: str,
    start_ms: int,
    rng: np.random.Generator,
    behaviour: Behaviour = Behaviour(),
) -> list[FeedbackEvent]:
    """Drive one user session and return the feedback events it posted.

    A bounce is a click followed by leaving the site within the dwell
    threshold; engaged visits stay longer than the threshold.
    """
    events: list[FeedbackEvent] = []
    t = start_ms
    threshold = behaviour.dwell_threshold_ms

    def post(kind: EventKind, impression_id: str, at: int, position=None, doc=None):
        ev = FeedbackEvent(f"{session_id}-e{len(events):03d}", session_id, impression_id,
                           kind, int(at), position, doc)
        client.feedback(ev)
        events.append(ev)

    n_requests = 1 + int(rng.integers(0, behaviour.max_requests))
    impression_id = None
    for _ in range(n_requests):
        if task is Task.ADHOC:
            qids = list(world.queries)
            context = qids[int(rng.integers(len(qids)))]
            payload = client.rank(context, world.queries[context], session_id, behaviour.page_size, t)
        else:
            context = world.seeds[int(rng.integers(len(world.seeds)))]
            payload = client.recommend(context, session_id, behaviour.requested_k, t)
        t += int(rng.integers(2_000, 8_000))
        if payload.get("skip"):
            continue
        impression_id = payload["impression_id"]
        items = payload["itemlist"]
        attractiveness = [model.attractiveness(world.grade(context, d)) for d in items]
        for pos in model.sample(attractiveness, rng):
            doc = items[pos]
            post(EventKind.CLICK, impression_id, t, pos + 1, doc)
            grade = world.grade(context, doc)
            if rng.random() < behaviour.bounce_probs[grade]:
                post(EventKind.PAGE_LEAVE, impression_id, t + int(rng.integers(1_000, threshold - 1_000)))
                return events
            dwell = int(rng.integers(threshold + 5_000, 120_000))
            if task is Task.RECOMMENDATION and rng.random() < behaviour.vote_prob:
                kind = EventKind.VOTE_UP if grade > 0 else EventKind.VOTE_DOWN
                post(kind, impression_id, t + int(rng.integers(2_000, threshold)), doc=doc)
            t += dwell
    if impression_id is not None:
        post(EventKind.PAGE_LEAVE, impression_id, t + threshold + int(rng.integers(1_000, 60_000)))
    return events


# -- campaigns ------------------------------------------------------------------------


@dataclass
class CampaignConfig:
    seed: int = 42
    sessions: int = 1000
    mode: str = "inproc"
    n_queries: int = 40
    n_seeds: int = 40
    n_docs: int = 20
    adhoc_share: float = 0.5
    click_model: dict = field(default_factory=lambda: {"kind": "cascade", "grade_probs": [0.02, 0.2, 0.5]})
    behaviour: dict = field(default_factory=dict)
    salt: str = "campaign"
    run_coverage: float = 0.8

    @classmethod
    def from_dict(cls, d: dict) -> "CampaignConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def to_dict(self) -> dict:
        return asdict(self)


ADMIN_TOKEN = "lab-admin"
APP_ID = "app-1"
APP_TOKEN = "app-1-token"
PARTICIPANTS = {"teamA": "token-a", "teamB": "token-b", "teamC": "token-c"}


def _stubs(world: SyntheticWorld, seed: int) -> dict[str, StubSystem]:
    return {
        "base": StubSystem("base", shuffled_ranker(world, seed)),
        "rel": StubSystem("rel", relevance_ranker(world, seed)),
        "noisy": StubSystem("noisy", noisy_ranker(world, seed, noise=1.0)),
    }


def _ndcg(world: SyntheticWorld, context: str, ranking, k: int = 10) -> float:
    gains = np.array([2 ** world.grade(context, d) - 1 for d in ranking[:k]], dtype=float)
    ideal = np.sort(np.array([2 ** world.grade(context, d) - 1
                              for d in world.candidates[context].candidates], dtype=float))[::-1][:k]
    disc = 1.0 / np.log2(np.arange(2, k + 2))
    idcg = float((ideal * disc[: len(ideal)]).sum())
    return float((gains * disc[: len(gains)]).sum()) / idcg if idcg > 0 else 0.0


class Campaign:
    """Standard scenario: three stub systems, two Type A runs, one app, one server.

    ===============  ====================  ===================================
    system           task                  backing
    ===============  ====================  ===================================
    search-base      adhoc (baseline)      stub ``base`` (shuffled order)
    datasets-base    recommendation (base) stub ``base``
    teamA-rel        adhoc                 stub ``rel`` (grade-sorted)
    teamA-rec        recommendation        stub ``rel``
    teamB-noisy      adhoc                 stub ``noisy``
    teamC-run        adhoc                 run file, partial query coverage
    teamC-rec        recommendation        run file from the noisy ranker
    ===============  ====================  ===================================
    """

    def __init__(self, config: CampaignConfig, log_path: str | None = None):
        self.config = config
        self.world = generate_world(config.n_queries, config.n_docs, config.seed, config.n_seeds)
        self.stubs = _stubs(self.world, config.seed)
        self.model = ClickModel.from_dict(config.click_model)
        self.behaviour = Behaviour(**config.behaviour)
        self.log_path = log_path
        self._services = []

    # systems and the run files of Type A participants
    def plan(self, urls: dict[str, str]) -> list[tuple[str, SystemRecord, str | None]]:
        w, seed = self.world, self.config.seed
        qids = list(w.queries)
        n_cov = max(1, int(round(len(qids) * self.config.run_coverage)))
        covered = sorted(np.random.default_rng([seed, 7]).choice(qids, size=n_cov, replace=False))
        run_adhoc = make_run(noisy_ranker(w, seed + 1, noise=0.5), covered, "teamC-run")
        run_rec = make_run(noisy_ranker(w, seed + 2, noise=1.5), w.seeds, "teamC-rec")
        ep, rb, bl = SystemKind.ENDPOINT_BACKED, SystemKind.RUN_BACKED, SystemKind.BASELINE
        return [
            ("lab", SystemRecord("search-base", bl, Task.ADHOC, urls["base"]), None),
            ("lab", SystemRecord("datasets-base", bl, Task.RECOMMENDATION, urls["base"]), None),
            ("teamA", SystemRecord("teamA-rel", ep, Task.ADHOC, urls["rel"]), None),
            ("teamA", SystemRecord("teamA-rec", ep, Task.RECOMMENDATION, urls["rel"]), None),
            ("teamB", SystemRecord("teamB-noisy", ep, Task.ADHOC, urls["noisy"]), None),
            ("teamC", SystemRecord("teamC-run", rb, Task.ADHOC, run_ref="teamC-run"), run_adhoc),
            ("teamC", SystemRecord("teamC-rec", rb, Task.RECOMMENDATION, run_ref="teamC-rec"), run_rec),
        ]

    def ground_truth(self, urls: dict[str, str]) -> dict[str, float]:
        """Mean nDCG@10 of each system over the contexts it serves."""
        from ..runs import parse_run_file

        by_url = {urls[name]: stub for name, stub in self.stubs.items()}
        out = {}
        for _, rec, run in self.plan(urls):
            contexts = list(self.world.queries) if rec.task is Task.ADHOC else list(self.world.seeds)
            if run is not None:
                rankings = {q: r.items for q, r in parse_run_file(run).rankings.items()}
            else:
                fn = by_url[rec.endpoint].rank_fn
                rankings = {c: fn(c) for c in contexts}
            out[rec.system_id] = float(np.mean([_ndcg(self.world, c, r) for c, r in rankings.items()]))
        return out

    def _register(self, make_client, urls) -> None:
        admin = make_client(ADMIN_TOKEN)
        for owner, rec, run in self.plan(urls):
            client = admin if owner == "lab" else make_client(PARTICIPANTS[owner])
            client.register_system(rec)
            if run is not None:
                entry = client.upload_run(rec.system_id, run)
                if entry["status"] != "validated":
                    raise RuntimeError(f"run for {rec.system_id} rejected: {entry['report']}")
            else:
                admin.set_status(rec.system_id, "validated")
            admin.set_status(rec.system_id, "live")

    def _server_config(self) -> ServerConfig:
        return ServerConfig(
            admin_token=ADMIN_TOKEN,
            participants={tok: name for name, tok in PARTICIPANTS.items()},
            app_tokens={APP_TOKEN: APP_ID},
            dwell_threshold_ms=self.behaviour.dwell_threshold_ms,
        )

    def _app_config(self) -> AppConfig:
        return AppConfig(app_id=APP_ID, salt=self.config.salt, page_size=self.behaviour.page_size)

    def _drive(self, client: AppClient) -> int:
        cfg = self.config
        n_events = 0
        t = EPOCH_MS
        for i in range(cfg.sessions):
            rng = np.random.default_rng([cfg.seed, i])
            task = Task.ADHOC if rng.random() < cfg.adhoc_share else Task.RECOMMENDATION
            t += int(rng.integers(1_000, 30_000))
            n_events += len(simulate_session(self.world, self.model, client, task,
                                             f"s{i:06d}", t, rng, self.behaviour))
        return n_events

    def run_inproc(self) -> tuple[str, dict]:
        transport = LocalTransport()
        urls = {}
        for name, stub in self.stubs.items():
            urls[name] = f"http://{name}.stub"
            transport.mount(urls[name], stub)
        server = CentralServer(
            self._server_config(),
            candidates=dict(self.world.candidates),
            clock=lambda: EPOCH_MS,
            probe=lambda url: EndpointClient(url, transport=transport).alive(),
        )
        self._register(lambda tok: LocalServerClient(server, tok), urls)
        app = SiteApp(
            self._app_config(),
            log=EventLog(self.log_path),
            candidates=dict(self.world.candidates),
            queries=dict(self.world.queries),
            transport=transport,
        )
        app.sync_from_server(LocalServerClient(server, ADMIN_TOKEN))
        self.app, self.server = app, server
        self._drive(InProcessAppClient(app))
        app.push_snapshots(LocalServerClient(server, APP_TOKEN))
        return server.report_json(), urls

    def run_wire(self) -> tuple[str, dict]:
        services = []
        try:
            urls = {}
            for name, stub in self.stubs.items():
                svc = stub.service().start()
                services.append(svc)
                urls[name] = svc.url
            server = CentralServer(self._server_config(), candidates=dict(self.world.candidates),
                                   clock=lambda: EPOCH_MS)
            server_svc = ServerService(server).start()
            services.append(server_svc)
            self._register(lambda tok: ServerClient(server_svc.url, tok), urls)
            app = SiteApp(
                self._app_config(),
                log=EventLog(self.log_path),
                candidates=dict(self.world.candidates),
                queries=dict(self.world.queries),
            )
            app.sync_from_server(ServerClient(server_svc.url, ADMIN_TOKEN))
            app_svc = AppService(app, server=ServerClient(server_svc.url, APP_TOKEN)).start()
            services.append(app_svc)
            self.app, self.server = app, server
            client = HttpAppClient(app_svc.url)
            try:
                self._drive(client)
                client.flush()
            finally:
                client.close()
            report = ServerClient(server_svc.url).report_json()
            return report, urls
        finally:
            for svc in reversed(services):
                svc.stop()

    def run(self) -> dict:
        if self.config.mode == "wire":
            report_json, urls = self.run_wire()
        elif self.config.mode == "inproc":
            report_json, urls = self.run_inproc()
        else:
            raise ValueError(f"unknown mode {self.config.mode!r}")
        self.report_json = report_json
        return summarize(self, json.loads(report_json), self.ground_truth(urls))


def summarize(campaign: Campaign, report: dict, truth: dict[str, float]) -> dict:
    """Join ground truth with the platform's verdicts.

    A verdict agrees when the platform orders the experimental systems the
    same way as their true nDCG@10 does.
    """
    def order(rows, key):
        rows = [r for r in rows if r["system_id"] in truth and key(r) is not None]
        return [r["system_id"] for r in sorted(rows, key=lambda r: (-key(r), r["system_id"]))]

    baselines = {"search-base", "datasets-base"}
    adhoc = [r for r in report["tasks"]["adhoc"] if r["system_id"] not in baselines]
    rec = report["tasks"]["recommendation"]
    verdict_adhoc = order(adhoc, lambda r: r["preference_score"] if r["wins"] + r["losses"] else None)
    verdict_rec = order(rec, lambda r: r["ctr"])
    truth_adhoc = sorted(verdict_adhoc, key=lambda s: (-truth[s], s))
    truth_rec = sorted(verdict_rec, key=lambda s: (-truth[s], s))
    return {
        "config": campaign.config.to_dict(),
        "ground_truth_ndcg10": truth,
        "verdicts": {
            "adhoc_by_preference": verdict_adhoc,
            "recommendation_by_ctr": verdict_rec,
        },
        "truth_order": {"adhoc": truth_adhoc, "recommendation": truth_rec},
        "agreement": {
            "adhoc": verdict_adhoc == truth_adhoc,
            "recommendation": verdict_rec == truth_rec,
        },
        "report": report,
    }


def run_campaign(config: CampaignConfig | dict, log_path: str | None = None) -> dict:
    if isinstance(config, dict):
        config = CampaignConfig.from_dict(config)
    return Campaign(config, log_path).run()


# -- focused interleaving trials -----------------------------------------------------------


@dataclass(frozen=True)
class InterleavingTrial:
    wins: int
    losses: int
    ties: int
    fallbacks: int
    impressions: int

    @property
    def preference_score(self) -> float:
        decided = self.wins + self.losses
        return self.wins / decided if decided else 0.5


def simulate_interleaving(
    world: SyntheticWorld,
    baseline: StubSystem,
    experimental: StubSystem,
    model: ClickModel,
    n_informative: int,
    seed: int,
    page_size: int = 10,
    max_impressions: int | None = None,
) -> InterleavingTrial:
    """Run single-query ad-hoc sessions through an in-process app until
    ``n_informative`` impressions produced a win or a loss."""
    transport = LocalTransport({"http://baseline.stub": baseline, "http://experimental.stub": experimental})
    config = AppConfig(
        app_id="trial",
        page_size=page_size,
        baselines={Task.ADHOC: SystemRecord("baseline", SystemKind.BASELINE, Task.ADHOC,
                                            "http://baseline.stub")},
        systems=[SystemRecord("experimental", SystemKind.ENDPOINT_BACKED, Task.ADHOC,
                              "http://experimental.stub")],
    )
    app = SiteApp(config, candidates=dict(world.candidates), queries=dict(world.queries),
                  transport=transport)
    qids = list(world.queries)
    wins = losses = ties = fallbacks = 0
    i = 0
    limit = max_impressions or 20 * n_informative
    while wins + losses < n_informative and i < limit:
        rng = np.random.default_rng([seed, i])
        qid = qids[int(rng.integers(len(qids)))]
        session = f"t{i:07d}"
        payload = app.handle_ranking(RankingRequest(session, qid, None, page_size, EPOCH_MS + i))
        items = payload["itemlist"]
        att = [model.attractiveness(world.grade(qid, d)) for d in items]
        for n, pos in enumerate(model.sample(att, rng)):
            app.record_feedback(FeedbackEvent(f"{session}-{n}", session, payload["impression_id"],
                                              EventKind.CLICK, EPOCH_MS + i, pos + 1, items[pos]))
        outcome = app.outcome(payload["impression_id"])
        if outcome is None:
            fallbacks += 1
        elif outcome.value == "win_experimental":
            wins += 1
        elif outcome.value == "win_baseline":
            losses += 1
        else:
            ties += 1
        i += 1
    return InterleavingTrial(wins, losses, ties, fallbacks, i)
