"""The on-premise site app.

Serves ad-hoc rankings (baseline interleaved with one experimental system,
chosen round-robin per impression) and dataset recommendations (one system per
session), records impressions and feedback in an append-only log, and ships the
log to the central server as sequence-numbered segments.

Experimental failures never reach the user: the baseline answer is served and
the impression is flagged as a fallback, which keeps it out of the
win/loss/tie tallies.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from ..assignment import ExperimentConfig, assign_session, clamp_k, fnv1a_64
from ..errors import (
    InvalidEvent,
    InvalidValue,
    NoBaseline,
    NotCovered,
    SystemCallError,
    UnknownClickedDoc,
    UnknownImpression,
)
from ..eventlog import EventLog
from ..interleave import credit_teams, team_draft_interleave
from ..model import (
    EventKind,
    FeedbackEvent,
    ImpressionRecord,
    Outcome,
    OutcomeRecord,
    Ranking,
    SystemKind,
    SystemRecord,
    Task,
    TeamLabel,
    check_token,
    record_from_dict,
    record_to_dict,
)
from ..runs import CandidateList, RunStore, load_candidates, load_queries, parse_run_file, read_run_file
from .config import AppConfig
from .endpoint import ClientPool, Transport, is_endpoint, query_endpoint_system

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RankingRequest:
    session_id: str
    query_id: str | None = None
    query_text: str | None = None
    page_size: int | None = None
    ts: int | None = None

    def validate(self) -> "RankingRequest":
        check_token(self.session_id, "session id")
        if not self.query_id and not self.query_text:
            raise InvalidValue("a ranking request needs query_id or query text")
        if self.page_size is not None and self.page_size < 1:
            raise InvalidValue("page_size must be >= 1")
        return self


@dataclass(frozen=True)
class RecommendationRequest:
    seed_id: str
    session_id: str
    requested_k: int = 0
    ts: int | None = None

    def validate(self) -> "RecommendationRequest":
        check_token(self.seed_id, "seed id")
        check_token(self.session_id, "session id")
        if self.requested_k < 0:
            raise InvalidValue("requested k must be >= 0")
        return self


SKIP = {"impression_id": None, "itemlist": [], "skip": True}


@dataclass
class _Live:
    record: ImpressionRecord
    clicks: set[str] = field(default_factory=set)
    outcome: Outcome | None = None


class SiteApp:
    def __init__(
        self,
        config: AppConfig,
        *,
        log: EventLog | None = None,
        runs: RunStore | None = None,
        candidates: dict[str, CandidateList] | None = None,
        queries: dict[str, str] | None = None,
        transport: Transport | None = None,
        clock: Callable[[], int] | None = None,
    ):
        self.config = config
        self.log = log if log is not None else EventLog(config.log_path)
        self.runs = runs if runs is not None else RunStore()
        self.candidates = candidates if candidates is not None else {}
        self.queries = queries if queries is not None else {}
        self._qid_by_text = {text: qid for qid, text in self.queries.items()}
        self.clients = ClientPool(config.deadline_ms, transport)
        self.clock = clock or (lambda: int(time.time() * 1000))

        self._lock = threading.RLock()
        self._baselines: dict[Task, SystemRecord] = dict(config.baselines)
        self._adhoc_arms: tuple[SystemRecord, ...] = ()
        self._rec_arms: dict[str, SystemRecord] = {}
        self._experiment: ExperimentConfig | None = None
        self._rr = 0
        self._n_impressions = 0
        self._impressions: dict[str, _Live] = {}
        self._seen_events: set[str] = set()

        self._outbox: list[dict] = []
        self._next_seq = 1
        self._cut_offset = 0
        self._dirty: dict[str, None] = {}
        self._outbox_path = (
            Path(str(config.log_path) + ".outbox.json") if config.log_path else None
        )

        self.set_systems(config.systems)
        self._replay()

    # -- construction helpers ----------------------------------------------------

    @classmethod
    def from_config(cls, config: AppConfig, **kwargs) -> "SiteApp":
        runs = kwargs.pop("runs", None) or RunStore()
        for ref, path in config.run_paths.items():
            runs.put(ref, read_run_file(path))
        candidates = load_candidates(config.candidates_path) if config.candidates_path else {}
        queries = load_queries(config.queries_path) if config.queries_path else {}
        return cls(config, runs=runs, candidates=candidates, queries=queries, **kwargs)

    def _replay(self) -> None:
        for d in self.log.read():
            rec = record_from_dict(d)
            if isinstance(rec, ImpressionRecord):
                self._impressions[rec.impression_id] = _Live(rec)
                self._n_impressions += 1
                if self._interleaved(rec):
                    self._impressions[rec.impression_id].outcome = Outcome.TIE
            else:
                self._seen_events.add(rec.event_id)
                live = self._impressions.get(rec.impression_id)
                if live is not None and rec.kind is EventKind.CLICK:
                    self._apply_click(live, rec.doc)
        if self._outbox_path is not None and self._outbox_path.exists():
            state = json.loads(self._outbox_path.read_text(encoding="utf-8"))
            self._next_seq = state["next_seq"]
            self._cut_offset = state["cut_offset"]
            self._outbox = state["segments"]
        if self._cut_offset < len(self.log):
            # impressions and clicks logged after the last cut still need outcomes shipped
            for d in self.log.read(self._cut_offset):
                self._dirty[d["impression_id"]] = None

    # -- registry ---------------------------------------------------------------------

    def set_systems(self, systems, baselines: dict[Task, SystemRecord] | None = None) -> None:
        """Replace the experimental system set (and optionally the baselines)."""
        adhoc = tuple(s for s in systems if s.task is Task.ADHOC and s.kind is not SystemKind.BASELINE)
        rec = [s for s in systems if s.task is Task.RECOMMENDATION and s.kind is not SystemKind.BASELINE]
        with self._lock:
            if baselines is not None:
                self._baselines = dict(baselines)
            base = self._baselines.get(Task.RECOMMENDATION)
            arms = ([base] if base is not None else []) + rec
            self._adhoc_arms = adhoc
            self._rec_arms = {s.system_id: s for s in arms}
            self._experiment = (
                ExperimentConfig(
                    self.config.experiment_id,
                    Task.RECOMMENDATION,
                    tuple(s.system_id for s in arms),
                    self.config.salt,
                    self.config.k_min,
                    self.config.k_max,
                ).validate()
                if arms
                else None
            )

    @property
    def experiment(self) -> ExperimentConfig | None:
        return self._experiment

    @property
    def adhoc_arms(self) -> tuple[SystemRecord, ...]:
        return self._adhoc_arms

    def sync_from_server(self, server) -> None:
        """Load live systems (and their runs) from the central server registry."""
        live = [e for e in server.list_systems() if e["status"] == "live"]
        systems, baselines = [], dict(self.config.baselines)
        for entry in live:
            rec = SystemRecord.from_dict(entry)
            if rec.run_ref is not None:
                self.runs.put(rec.run_ref, parse_run_file(server.get_run(rec.system_id)))
            if rec.kind is SystemKind.BASELINE:
                baselines.setdefault(rec.task, rec)
            else:
                systems.append(rec)
        self.set_systems(systems, baselines)

    # -- ranking retrieval ----------------------------------------------------------------

    def _fetch(self, sys: SystemRecord, context: str, query_text: str | None = None) -> Ranking:
        cands = self.candidates.get(context)
        if is_endpoint(sys):
            return query_endpoint_system(
                sys, context, self.clients.get(sys.endpoint), query_text, cands
            )
        if sys.run_ref is not None:
            rs = self.runs.get(sys.run_ref)
            if rs is None:
                raise SystemCallError(f"run {sys.run_ref!r} is not loaded")
            ranking = rs.ranking(context)
            if ranking is None:
                raise NotCovered(f"{sys.system_id} has no ranking for {context!r}")
            return Ranking(context, ranking.items, sys.system_id)
        if cands is None:
            raise NotCovered(f"no candidate list for {context!r}")
        return Ranking(context, cands.candidates, sys.system_id)

    @staticmethod
    def _interleaved(rec: ImpressionRecord) -> bool:
        return rec.task is Task.ADHOC and rec.teams is not None and not rec.fallback

    def _new_impression_id(self) -> str:
        self._n_impressions += 1
        return f"{self.config.app_id}-{self._n_impressions:08d}"

    def _commit(self, rec: ImpressionRecord) -> None:
        with self._lock:
            self.log.append(record_to_dict(rec))
            live = _Live(rec)
            if self._interleaved(rec):
                live.outcome = Outcome.TIE
            self._impressions[rec.impression_id] = live
            self._dirty[rec.impression_id] = None

    # -- public operations -------------------------------------------------------------------

    def handle_ranking(self, req: RankingRequest) -> dict:
        req.validate()
        qid = req.query_id or self._qid_by_text.get(req.query_text)
        text = req.query_text or self.queries.get(qid)
        context = qid or f"text-{fnv1a_64(text.encode('utf-8')):016x}"
        page = req.page_size or self.config.page_size
        at = req.ts if req.ts is not None else self.clock()

        baseline = self._baselines.get(Task.ADHOC)
        if baseline is None:
            raise NoBaseline("no ad-hoc baseline configured")
        try:
            base_rank = self._fetch(baseline, context, text)
        except SystemCallError as exc:
            raise NoBaseline(f"baseline failed: {exc}") from exc

        with self._lock:
            arms = self._adhoc_arms
            arm = arms[self._rr % len(arms)] if arms else None
            self._rr += 1
            impression_id = self._new_impression_id()

        reason = None
        if arm is not None:
            try:
                exp_rank = self._fetch(arm, context, text)
            except SystemCallError as exc:
                reason = type(exc).__name__
                logger.info("falling back to baseline for %s: %s", arm.system_id, exc)

        if arm is not None and reason is None:
            tdi = team_draft_interleave(base_rank, exp_rank, page, impression_id=impression_id)
            items, teams = tdi.docs, tdi.teams
            served_by = tuple(
                baseline.system_id if t is TeamLabel.BASELINE else arm.system_id for t in teams
            )
            systems = (baseline.system_id, arm.system_id)
        else:
            items, teams = base_rank.items[:page], None
            served_by = (baseline.system_id,) * len(items)
            systems = (baseline.system_id,)

        self._commit(
            ImpressionRecord(
                impression_id=impression_id,
                session_id=req.session_id,
                task=Task.ADHOC,
                context=context,
                items=items,
                served_by=served_by,
                systems=systems,
                arm=None if arm is None else arm.system_id,
                at=at,
                teams=teams,
                fallback=reason is not None,
                fallback_reason=reason,
            )
        )
        return {"impression_id": impression_id, "query_id": qid, "itemlist": list(items), "skip": False}

    def handle_recommendation(self, req: RecommendationRequest) -> dict:
        req.validate()
        at = req.ts if req.ts is not None else self.clock()
        with self._lock:
            cfg, arms = self._experiment, self._rec_arms
        if cfg is None:
            return dict(SKIP)
        cands = self.candidates.get(req.seed_id)
        if cands is not None and clamp_k(req.requested_k, len(cands), cfg) is None:
            return dict(SKIP)

        arm = arms[assign_session(req.session_id, cfg)]
        serving, reason = arm, None
        try:
            ranking = self._fetch(arm, req.seed_id)
        except SystemCallError as exc:
            reason = type(exc).__name__
            baseline = self._baselines.get(Task.RECOMMENDATION)
            if baseline is None or baseline.system_id == arm.system_id:
                return dict(SKIP)
            try:
                ranking = self._fetch(baseline, req.seed_id)
            except SystemCallError:
                return dict(SKIP)
            serving = baseline
            logger.info("recommendation fallback from %s: %s", arm.system_id, exc)

        k = clamp_k(req.requested_k, len(ranking), cfg)
        if k is None:
            return dict(SKIP)
        items = ranking.items[:k]
        with self._lock:
            impression_id = self._new_impression_id()
            self._commit(
                ImpressionRecord(
                    impression_id=impression_id,
                    session_id=req.session_id,
                    task=Task.RECOMMENDATION,
                    context=req.seed_id,
                    items=items,
                    served_by=(serving.system_id,) * len(items),
                    systems=(serving.system_id,),
                    arm=arm.system_id,
                    at=at,
                    fallback=reason is not None,
                    fallback_reason=reason,
                )
            )
        return {"impression_id": impression_id, "item_id": req.seed_id, "itemlist": list(items), "skip": False}

    def _apply_click(self, live: _Live, doc: str) -> None:
        live.clicks.add(doc)
        if self._interleaved(live.record):
            live.outcome = credit_teams(live.record.items, live.record.teams, live.clicks)

    def record_feedback(self, event: FeedbackEvent) -> dict:
        event.validate()
        if event.kind is EventKind.IMPRESSION:
            raise InvalidEvent("impression events are generated by the app, not posted")
        with self._lock:
            if event.event_id in self._seen_events:
                return {"status": "duplicate", "event_id": event.event_id}
            live = self._impressions.get(event.impression_id)
            if live is None:
                raise UnknownImpression(event.impression_id)
            items = live.record.items
            if event.doc is not None and event.doc not in items:
                raise UnknownClickedDoc(event.doc)
            if event.position is not None:
                if event.position > len(items):
                    raise InvalidEvent(f"position {event.position} exceeds list length {len(items)}")
                if event.doc is not None and items[event.position - 1] != event.doc:
                    raise InvalidEvent(f"position {event.position} does not hold {event.doc!r}")
            self.log.append(record_to_dict(event))
            self._seen_events.add(event.event_id)
            if event.kind is EventKind.CLICK:
                self._apply_click(live, event.doc)
                self._dirty[event.impression_id] = None
        return {"status": "ok", "event_id": event.event_id}

    def outcome(self, impression_id: str) -> Outcome | None:
        """Current outcome of an interleaved impression; None for fallbacks and recommendations."""
        with self._lock:
            live = self._impressions.get(impression_id)
            if live is None:
                raise UnknownImpression(impression_id)
            return live.outcome

    def outcomes(self) -> list[OutcomeRecord]:
        with self._lock:
            return [self._outcome(live) for live in self._impressions.values() if live.outcome is not None]

    @staticmethod
    def _outcome(live: _Live) -> OutcomeRecord:
        base, exp = live.record.systems
        return OutcomeRecord(live.record.impression_id, base, exp, live.outcome)

    # -- snapshot shipping ------------------------------------------------------------------------

    def metadata(self) -> dict:
        with self._lock:
            return {
                "app_id": self.config.app_id,
                "baselines": {t.value: b.system_id for t, b in sorted(self._baselines.items())},
                "adhoc_arms": [s.system_id for s in self._adhoc_arms],
                "recommendation_experiment": None
                if self._experiment is None
                else self._experiment.to_dict(),
                "page_size": self.config.page_size,
                "deadline_ms": self.config.deadline_ms,
            }

    def cut_segment(self) -> dict | None:
        """Close the current segment: new log records plus changed outcomes."""
        with self._lock:
            end = len(self.log)
            if end == self._cut_offset and not self._dirty:
                return None
            outcomes = []
            for imp_id in self._dirty:
                live = self._impressions.get(imp_id)
                if live is not None and live.outcome is not None:
                    outcomes.append(self._outcome(live).to_dict())
            seg = {
                "app_id": self.config.app_id,
                "seq": self._next_seq,
                "records": self.log.read(self._cut_offset, end),
                "outcomes": outcomes,
                "meta": self.metadata(),
            }
            self._next_seq += 1
            self._cut_offset = end
            self._dirty.clear()
            self._outbox.append(seg)
            self._save_outbox()
            return seg

    def pending_segments(self) -> list[dict]:
        with self._lock:
            return list(self._outbox)

    def acknowledge(self, next_expected: int) -> None:
        with self._lock:
            self._outbox = [s for s in self._outbox if s["seq"] >= next_expected]
            self._save_outbox()

    def _save_outbox(self) -> None:
        if self._outbox_path is None:
            return
        tmp = self._outbox_path.with_suffix(".tmp")
        tmp.write_text(
            json.dumps(
                {"next_seq": self._next_seq, "cut_offset": self._cut_offset, "segments": self._outbox}
            ),
            encoding="utf-8",
        )
        os.replace(tmp, self._outbox_path)

    def push_snapshots(self, server) -> int:
        """Cut a segment and deliver every unacknowledged one; returns segments sent."""
        self.cut_segment()
        sent = 0
        for seg in self.pending_segments():
            ack = server.push_snapshot(seg)
            sent += 1
            self.acknowledge(ack["next_expected"])
        return sent

    def healthz(self) -> dict:
        with self._lock:
            return {
                "status": "ok",
                "app_id": self.config.app_id,
                "impressions": self._n_impressions,
                "log_records": len(self.log),
                "pending_segments": len(self._outbox),
            }
