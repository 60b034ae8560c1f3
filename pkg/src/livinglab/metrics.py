"""Feedback metrics and per-system scorecards.

Inputs are log records (impressions and feedback events) plus the current
team-draft outcome per ad-hoc impression. Attribution rules:

* an impression counts for every system listed in ``ImpressionRecord.systems``
  (both teams of an interleaved list, only the baseline after a fallback);
* a click, vote or bounce counts for the system that contributed the document;
* ``clicks`` is the number of a system's impressions with at least one click on
  its documents, so ``ctr = clicks / impressions`` stays within [0, 1];
* a clicked visit bounces when the next record in the session is a
  ``page_leave`` within the dwell threshold, or when nothing follows it;
* for votes, the last vote per (session, document) wins.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, fields, replace
from statistics import NormalDist
from typing import Iterable, Mapping

from .interleave import credit_teams
from .model import (
    EventKind,
    FeedbackEvent,
    ImpressionRecord,
    LogRecord,
    Outcome,
    OutcomeRecord,
    SystemId,
    SystemRecord,
    Task,
)

DEFAULT_DWELL_THRESHOLD_MS = 10_000
_Z95 = NormalDist().inv_cdf(0.975)


def wilson_interval(successes: int, n: int, z: float = _Z95) -> tuple[float, float] | None:
    if n == 0:
        return None
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * ((p * (1 - p) / n + z * z / (4 * n * n)) ** 0.5) / denom
    return (max(0.0, centre - half), min(1.0, centre + half))


@dataclass(frozen=True)
class SystemScorecard:
    system_id: SystemId
    task: Task | None = None
    impressions: int = 0
    clicks: int = 0
    clicked_visits: int = 0
    bounces: int = 0
    votes_up: int = 0
    votes_down: int = 0
    wins: int = 0
    losses: int = 0
    ties: int = 0
    fallbacks: int = 0

    @property
    def ctr(self) -> float | None:
        return self.clicks / self.impressions if self.impressions else None

    @property
    def bounce_rate(self) -> float | None:
        return self.bounces / self.clicked_visits if self.clicked_visits else None

    @property
    def votes_net(self) -> int:
        return self.votes_up - self.votes_down

    @property
    def preference_score(self) -> float:
        decided = self.wins + self.losses
        return self.wins / decided if decided else 0.5

    @property
    def preference_interval(self) -> tuple[float, float] | None:
        return wilson_interval(self.wins, self.wins + self.losses)

    def to_dict(self) -> dict:
        ci = self.preference_interval
        return {
            "system_id": self.system_id,
            "task": None if self.task is None else self.task.value,
            "impressions": self.impressions,
            "clicks": self.clicks,
            "ctr": self.ctr,
            "clicked_visits": self.clicked_visits,
            "bounces": self.bounces,
            "bounce_rate": self.bounce_rate,
            "votes_up": self.votes_up,
            "votes_down": self.votes_down,
            "votes_net": self.votes_net,
            "wins": self.wins,
            "losses": self.losses,
            "ties": self.ties,
            "preference_score": self.preference_score,
            "preference_interval": None if ci is None else list(ci),
            "fallbacks": self.fallbacks,
        }


_COUNT_FIELDS = tuple(f.name for f in fields(SystemScorecard) if f.name not in ("system_id", "task"))


def merge_scorecards(a: SystemScorecard, b: SystemScorecard) -> SystemScorecard:
    if a.system_id != b.system_id:
        raise ValueError("cannot merge scorecards of different systems")
    counts = {name: getattr(a, name) + getattr(b, name) for name in _COUNT_FIELDS}
    return replace(a, task=a.task or b.task, **counts)


def merge_scorecard_lists(*lists: Iterable[SystemScorecard]) -> list[SystemScorecard]:
    merged: dict[SystemId, SystemScorecard] = {}
    for cards in lists:
        for card in cards:
            merged[card.system_id] = (
                merge_scorecards(merged[card.system_id], card) if card.system_id in merged else card
            )
    return [merged[k] for k in sorted(merged)]


def _split(records: Iterable[LogRecord]):
    impressions: dict[str, ImpressionRecord] = {}
    sessions: dict[str, list[tuple[int, LogRecord]]] = defaultdict(list)
    for idx, rec in enumerate(records):
        if isinstance(rec, ImpressionRecord):
            impressions[rec.impression_id] = rec
        sessions[rec.session_id].append((idx, rec))
    for timeline in sessions.values():
        timeline.sort(key=lambda p: (p[1].at, p[0]))
    return impressions, sessions


def _served_by(imp: ImpressionRecord, ev: FeedbackEvent) -> SystemId | None:
    pos = imp.position_of(ev.doc) if ev.doc is not None else None
    if pos is None:
        return None
    return imp.served_by[pos - 1]


def _tally(
    records: Iterable[LogRecord],
    outcomes: Iterable[OutcomeRecord],
    dwell_threshold_ms: int,
) -> tuple[dict[SystemId, dict[str, int]], dict[SystemId, Task]]:
    counts: dict[SystemId, dict[str, int]] = defaultdict(lambda: dict.fromkeys(_COUNT_FIELDS, 0))
    tasks: dict[SystemId, Task] = {}
    impressions, sessions = _split(records)

    for imp in impressions.values():
        for sid in imp.systems:
            counts[sid]["impressions"] += 1
            tasks.setdefault(sid, imp.task)
        if imp.fallback and imp.arm is not None:
            counts[imp.arm]["fallbacks"] += 1
            tasks.setdefault(imp.arm, imp.task)

    clicked: set[tuple[str, SystemId]] = set()
    last_vote: dict[tuple[SystemId, str, str], EventKind] = {}
    for timeline in sessions.values():
        for i, (_, rec) in enumerate(timeline):
            if not isinstance(rec, FeedbackEvent) or rec.kind in (
                EventKind.IMPRESSION,
                EventKind.PAGE_LEAVE,
            ):
                continue
            imp = impressions.get(rec.impression_id)
            if imp is None:
                continue
            sid = _served_by(imp, rec)
            if sid is None:
                continue
            if rec.kind is EventKind.CLICK:
                clicked.add((imp.impression_id, sid))
                counts[sid]["clicked_visits"] += 1
                nxt = timeline[i + 1][1] if i + 1 < len(timeline) else None
                if nxt is None or (
                    isinstance(nxt, FeedbackEvent)
                    and nxt.kind is EventKind.PAGE_LEAVE
                    and nxt.at - rec.at <= dwell_threshold_ms
                ):
                    counts[sid]["bounces"] += 1
            else:
                # timeline is time-ordered, so later votes overwrite earlier ones
                last_vote[(sid, rec.session_id, rec.doc)] = rec.kind

    for _, sid in clicked:
        counts[sid]["clicks"] += 1
    for (sid, _, _), kind in last_vote.items():
        counts[sid]["votes_up" if kind is EventKind.VOTE_UP else "votes_down"] += 1

    for o in outcomes:
        exp, base = counts[o.experimental], counts[o.baseline]
        if o.outcome is Outcome.WIN_EXPERIMENTAL:
            exp["wins"] += 1
            base["losses"] += 1
        elif o.outcome is Outcome.WIN_BASELINE:
            exp["losses"] += 1
            base["wins"] += 1
        else:
            exp["ties"] += 1
            base["ties"] += 1
    return counts, tasks


def build_scorecards(
    records: Iterable[LogRecord],
    outcomes: Iterable[OutcomeRecord] = (),
    registry: Iterable[SystemRecord] = (),
    dwell_threshold_ms: int = DEFAULT_DWELL_THRESHOLD_MS,
) -> list[SystemScorecard]:
    """One scorecard per registered or observed system, sorted by system id.

    Baseline systems receive the mirror image of their opponents' outcomes.
    """
    counts, tasks = _tally(records, outcomes, dwell_threshold_ms)
    for rec in registry:
        tasks[rec.system_id] = rec.task
    ids = sorted(set(tasks) | set(counts))
    zero = dict.fromkeys(_COUNT_FIELDS, 0)
    return [SystemScorecard(sid, tasks.get(sid), **counts.get(sid, zero)) for sid in ids]


def _card(records, system_id, dwell_threshold_ms=DEFAULT_DWELL_THRESHOLD_MS) -> SystemScorecard:
    counts, tasks = _tally(records, (), dwell_threshold_ms)
    return SystemScorecard(system_id, tasks.get(system_id), **counts.get(system_id, {}))


def compute_ctr(records: Iterable[LogRecord], system_id: SystemId) -> float | None:
    return _card(records, system_id).ctr


def compute_bounce_rate(
    records: Iterable[LogRecord],
    system_id: SystemId,
    dwell_threshold_ms: int = DEFAULT_DWELL_THRESHOLD_MS,
) -> float | None:
    return _card(records, system_id, dwell_threshold_ms).bounce_rate


@dataclass(frozen=True)
class VoteTally:
    up: int
    down: int

    @property
    def net(self) -> int:
        return self.up - self.down


def tally_votes(records: Iterable[LogRecord], system_id: SystemId) -> VoteTally:
    card = _card(records, system_id)
    return VoteTally(card.votes_up, card.votes_down)


def derive_outcomes(records: Iterable[LogRecord]) -> list[OutcomeRecord]:
    """Team-draft outcomes for every interleaved, non-fallback impression."""
    impressions: dict[str, ImpressionRecord] = {}
    clicks: dict[str, set[str]] = defaultdict(set)
    for rec in records:
        if isinstance(rec, ImpressionRecord):
            impressions[rec.impression_id] = rec
        elif rec.kind is EventKind.CLICK and rec.doc is not None:
            clicks[rec.impression_id].add(rec.doc)
    out = []
    for imp in impressions.values():
        if imp.task is not Task.ADHOC or imp.fallback or imp.teams is None:
            continue
        base, exp = imp.systems
        outcome = credit_teams(imp.items, imp.teams, clicks.get(imp.impression_id, ()))
        out.append(OutcomeRecord(imp.impression_id, base, exp, outcome))
    return out


def scorecards_by_task(cards: Iterable[SystemScorecard]) -> Mapping[str, list[SystemScorecard]]:
    """Dashboard ordering: ad-hoc by preference score, recommendation by CTR."""
    adhoc = [c for c in cards if c.task is Task.ADHOC]
    rec = [c for c in cards if c.task is Task.RECOMMENDATION]
    adhoc.sort(key=lambda c: (-c.preference_score, c.system_id))
    rec.sort(key=lambda c: (-(c.ctr if c.ctr is not None else -1.0), c.system_id))
    return {"adhoc": adhoc, "recommendation": rec}
