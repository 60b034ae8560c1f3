"""Shared domain types.

Identifiers are opaque tokens. Timestamps are integer milliseconds since the
Unix epoch (UTC). Every type offers ``validate()`` (raises on a broken
invariant) and a ``to_dict``/``from_dict`` pair used for the JSON wire and log
formats.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Iterable

from .errors import DuplicateDoc, EmptyRanking, InvalidValue

DocId = str
ContextId = str  # a query id (ad-hoc search) or a seed document id (recommendation)
SystemId = str


class Task(str, enum.Enum):
    ADHOC = "adhoc"
    RECOMMENDATION = "recommendation"


class SystemKind(str, enum.Enum):
    RUN_BACKED = "run_backed"
    ENDPOINT_BACKED = "endpoint_backed"
    BASELINE = "baseline"


class EventKind(str, enum.Enum):
    IMPRESSION = "impression"
    CLICK = "click"
    VOTE_UP = "vote_up"
    VOTE_DOWN = "vote_down"
    PAGE_LEAVE = "page_leave"


class Outcome(str, enum.Enum):
    WIN_EXPERIMENTAL = "win_experimental"
    WIN_BASELINE = "win_baseline"
    TIE = "tie"


class TeamLabel(str, enum.Enum):
    BASELINE = "baseline"
    EXPERIMENTAL = "experimental"


def is_token(value: Any) -> bool:
    """True for a non-empty string without whitespace or control characters."""
    return (
        isinstance(value, str)
        and bool(value)
        and all(c.isprintable() and not c.isspace() for c in value)
    )


def check_token(value: Any, what: str = "identifier") -> str:
    if not is_token(value):
        raise InvalidValue(f"invalid {what}: {value!r}")
    return value


def _check_timestamp(value: Any, what: str = "timestamp") -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise InvalidValue(f"{what} must be a non-negative integer (ms), got {value!r}")
    return value


@dataclass(frozen=True)
class Ranking:
    """Ordered documents a system returned for one query or seed document."""

    context: ContextId
    items: tuple[DocId, ...]
    source: SystemId

    def __post_init__(self):
        if not isinstance(self.items, tuple):
            object.__setattr__(self, "items", tuple(self.items))

    def __len__(self) -> int:
        return len(self.items)

    def validate(self) -> "Ranking":
        validate_ranking(self)
        return self

    def top(self, n: int) -> "Ranking":
        return Ranking(self.context, self.items[:n], self.source)

    def to_dict(self) -> dict:
        return {"context": self.context, "items": list(self.items), "source": self.source}

    @classmethod
    def from_dict(cls, d: dict) -> "Ranking":
        return cls(d["context"], tuple(d["items"]), d["source"]).validate()


def validate_ranking(r: Ranking) -> None:
    """Raise ``EmptyRanking`` or ``DuplicateDoc`` if ``r`` is not a valid ranking."""
    if not r.items:
        raise EmptyRanking()
    seen: set[str] = set()
    for doc in r.items:
        check_token(doc, "document id")
        if doc in seen:
            raise DuplicateDoc(doc)
        seen.add(doc)
    check_token(r.context, "context id")


@dataclass(frozen=True)
class SystemRecord:
    system_id: SystemId
    kind: SystemKind
    task: Task
    endpoint: str | None = None
    run_ref: str | None = None

    def validate(self) -> "SystemRecord":
        check_token(self.system_id, "system id")
        if not isinstance(self.kind, SystemKind) or not isinstance(self.task, Task):
            raise InvalidValue("kind and task must be enum members")
        if self.kind is SystemKind.ENDPOINT_BACKED:
            if not self.endpoint or self.run_ref is not None:
                raise InvalidValue("endpoint-backed systems need an endpoint and no run")
        elif self.kind is SystemKind.RUN_BACKED:
            if not self.run_ref or self.endpoint is not None:
                raise InvalidValue("run-backed systems need a run reference and no endpoint")
        elif self.endpoint and self.run_ref:
            raise InvalidValue("a baseline is backed by an endpoint or a run, not both")
        return self

    def to_dict(self) -> dict:
        return {
            "system_id": self.system_id,
            "kind": self.kind.value,
            "task": self.task.value,
            "endpoint": self.endpoint,
            "run_ref": self.run_ref,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SystemRecord":
        try:
            kind, task = SystemKind(d["kind"]), Task(d["task"])
        except (KeyError, ValueError) as exc:
            raise InvalidValue(f"bad system record: {exc}") from None
        return cls(
            d.get("system_id"), kind, task, d.get("endpoint"), d.get("run_ref")
        ).validate()


@dataclass(frozen=True)
class FeedbackEvent:
    event_id: str
    session_id: str
    impression_id: str
    kind: EventKind
    at: int
    position: int | None = None
    doc: DocId | None = None

    def validate(self) -> "FeedbackEvent":
        check_token(self.event_id, "event id")
        check_token(self.session_id, "session id")
        check_token(self.impression_id, "impression id")
        if not isinstance(self.kind, EventKind):
            raise InvalidValue(f"bad event kind {self.kind!r}")
        _check_timestamp(self.at)
        if self.position is not None and (
            isinstance(self.position, bool)
            or not isinstance(self.position, int)
            or self.position < 1
        ):
            raise InvalidValue(f"position must be a 1-based integer, got {self.position!r}")
        if self.kind is EventKind.CLICK and (self.position is None or self.doc is None):
            raise InvalidValue("click events need both position and doc")
        if self.kind in (EventKind.VOTE_UP, EventKind.VOTE_DOWN) and self.doc is None:
            raise InvalidValue("vote events need a doc")
        if self.doc is not None:
            check_token(self.doc, "document id")
        return self

    def to_dict(self) -> dict:
        d = {
            "event_id": self.event_id,
            "session_id": self.session_id,
            "impression_id": self.impression_id,
            "kind": self.kind.value,
            "at": self.at,
        }
        if self.position is not None:
            d["position"] = self.position
        if self.doc is not None:
            d["doc"] = self.doc
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FeedbackEvent":
        try:
            kind = EventKind(d["kind"])
            return cls(
                d["event_id"],
                d["session_id"],
                d["impression_id"],
                kind,
                d["at"],
                d.get("position"),
                d.get("doc"),
            ).validate()
        except (KeyError, TypeError) as exc:
            raise InvalidValue(f"bad feedback event: missing {exc}") from None
        except ValueError as exc:
            if isinstance(exc, InvalidValue):
                raise
            raise InvalidValue(f"bad feedback event: {exc}") from None


@dataclass(frozen=True)
class ImpressionRecord:
    """Server-side record of one served panel.

    ``served_by[i]`` is the system credited with ``items[i]``; ``teams`` holds
    the team-draft labels for ad-hoc impressions. ``arm`` is the system the
    traffic split selected, which differs from the serving system on fallback.
    """

    impression_id: str
    session_id: str
    task: Task
    context: ContextId
    items: tuple[DocId, ...]
    served_by: tuple[SystemId, ...]
    systems: tuple[SystemId, ...]
    arm: SystemId | None
    at: int
    teams: tuple[TeamLabel, ...] | None = None
    fallback: bool = False
    fallback_reason: str | None = None

    def __post_init__(self):
        for name in ("items", "served_by", "systems"):
            value = getattr(self, name)
            if not isinstance(value, tuple):
                object.__setattr__(self, name, tuple(value))
        if self.teams is not None and not isinstance(self.teams, tuple):
            object.__setattr__(self, "teams", tuple(self.teams))

    def validate(self) -> "ImpressionRecord":
        check_token(self.impression_id, "impression id")
        check_token(self.session_id, "session id")
        _check_timestamp(self.at)
        if len(set(self.items)) != len(self.items):
            raise InvalidValue("impression lists a document twice")
        if len(self.served_by) != len(self.items):
            raise InvalidValue("served_by must align with items")
        if self.teams is not None and len(self.teams) != len(self.items):
            raise InvalidValue("teams must align with items")
        if not set(self.served_by) <= set(self.systems):
            raise InvalidValue("every serving system must be listed in systems")
        return self

    def position_of(self, doc: DocId) -> int | None:
        try:
            return self.items.index(doc) + 1
        except ValueError:
            return None

    def to_dict(self) -> dict:
        return {
            "impression_id": self.impression_id,
            "session_id": self.session_id,
            "task": self.task.value,
            "context": self.context,
            "items": list(self.items),
            "served_by": list(self.served_by),
            "systems": list(self.systems),
            "arm": self.arm,
            "at": self.at,
            "teams": None if self.teams is None else [t.value for t in self.teams],
            "fallback": self.fallback,
            "fallback_reason": self.fallback_reason,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ImpressionRecord":
        teams = d.get("teams")
        return cls(
            d["impression_id"],
            d["session_id"],
            Task(d["task"]),
            d["context"],
            tuple(d["items"]),
            tuple(d["served_by"]),
            tuple(d["systems"]),
            d.get("arm"),
            d["at"],
            None if teams is None else tuple(TeamLabel(t) for t in teams),
            bool(d.get("fallback", False)),
            d.get("fallback_reason"),
        ).validate()


@dataclass(frozen=True)
class OutcomeRecord:
    """Current team-draft outcome of one ad-hoc impression."""

    impression_id: str
    baseline: SystemId
    experimental: SystemId
    outcome: Outcome

    def to_dict(self) -> dict:
        return {
            "impression_id": self.impression_id,
            "baseline": self.baseline,
            "experimental": self.experimental,
            "outcome": self.outcome.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OutcomeRecord":
        return cls(d["impression_id"], d["baseline"], d["experimental"], Outcome(d["outcome"]))


@dataclass
class Session:
    session_id: str
    started_at: int
    events: list[FeedbackEvent] = field(default_factory=list)

    def validate(self) -> "Session":
        check_token(self.session_id, "session id")
        _check_timestamp(self.started_at, "started_at")
        last = self.started_at
        for ev in self.events:
            ev.validate()
            if ev.session_id != self.session_id:
                raise InvalidValue(f"event {ev.event_id} belongs to another session")
            if ev.at < last:
                raise InvalidValue("session events must be non-decreasing in time")
            last = ev.at
        return self

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "started_at": self.started_at,
            "events": [e.to_dict() for e in self.events],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Session":
        return cls(
            d["session_id"],
            d["started_at"],
            [FeedbackEvent.from_dict(e) for e in d.get("events", [])],
        ).validate()


LogRecord = ImpressionRecord | FeedbackEvent


def record_to_dict(rec: LogRecord) -> dict:
    """Tagged dict form used by the event log and snapshot segments."""
    if isinstance(rec, ImpressionRecord):
        return {"type": "impression", **rec.to_dict()}
    return {"type": "event", **rec.to_dict()}


def record_from_dict(d: dict) -> LogRecord:
    d = dict(d)
    kind = d.pop("type")
    if kind == "impression":
        return ImpressionRecord.from_dict(d)
    if kind == "event":
        return FeedbackEvent.from_dict(d)
    raise InvalidValue(f"unknown record type {kind!r}")


def records_from_dicts(ds: Iterable[dict]) -> list[LogRecord]:
    return [record_from_dict(d) for d in ds]
