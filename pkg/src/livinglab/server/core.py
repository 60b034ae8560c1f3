"""Central server: system registry, run uploads, snapshot aggregation, dashboard.

Apps deliver their logs as segments numbered 1, 2, 3, ... per app. A segment
is applied exactly once: repeats are acknowledged without effect and segments
that arrive ahead of a gap are parked until the gap is filled. The dashboard
report is a pure function of the applied segment set.
"""

from __future__ import annotations

import enum
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from ..errors import (
    AuthFailure,
    DuplicateSystemId,
    InvalidTransition,
    InvalidValue,
    RunFormatError,
    UnknownSystem,
)
from ..eventlog import EventLog
from ..metrics import DEFAULT_DWELL_THRESHOLD_MS, build_scorecards, scorecards_by_task
from ..model import LogRecord, OutcomeRecord, SystemKind, SystemRecord, check_token, record_from_dict
from ..runs import CandidateList, RunStore, load_candidates, parse_run_file, validate_against_candidates

logger = logging.getLogger(__name__)

REPORT_FORMAT = "livinglab-dashboard/1"
LAB_PARTICIPANT = "lab"


class Status(str, enum.Enum):
    SUBMITTED = "submitted"
    VALIDATED = "validated"
    LIVE = "live"
    RETIRED = "retired"


_NEXT_STATUS = {
    Status.SUBMITTED: Status.VALIDATED,
    Status.VALIDATED: Status.LIVE,
    Status.LIVE: Status.RETIRED,
}


@dataclass
class RegistryEntry:
    record: SystemRecord
    participant: str
    status: Status
    submitted_at: int
    report: dict | None = None

    def to_dict(self) -> dict:
        return {
            **self.record.to_dict(),
            "participant": self.participant,
            "status": self.status.value,
            "submitted_at": self.submitted_at,
            "report": self.report,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegistryEntry":
        return cls(
            SystemRecord.from_dict(d),
            d["participant"],
            Status(d["status"]),
            d["submitted_at"],
            d.get("report"),
        )


@dataclass
class ServerConfig:
    admin_token: str = "admin"
    participants: dict[str, str] = field(default_factory=dict)  # token -> participant
    app_tokens: dict[str, str] = field(default_factory=dict)  # token -> app id
    candidates_path: str | None = None
    data_dir: str | None = None
    host: str = "127.0.0.1"
    port: int = 8000
    dwell_threshold_ms: int = DEFAULT_DWELL_THRESHOLD_MS

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | os.PathLike = ".") -> "ServerConfig":
        base = Path(base_dir)
        return cls(
            admin_token=d.get("admin_token", "admin"),
            participants={tok: name for name, tok in d.get("participants", {}).items()},
            app_tokens={tok: app for app, tok in d.get("apps", {}).items()},
            candidates_path=str(base / d["candidates"]) if d.get("candidates") else None,
            data_dir=str(base / d["data_dir"]) if d.get("data_dir") else None,
            host=d.get("host", "127.0.0.1"),
            port=int(d.get("port", 8000)),
            dwell_threshold_ms=int(d.get("dwell_threshold_ms", DEFAULT_DWELL_THRESHOLD_MS)),
        )

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ServerConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")), path.parent)


@dataclass
class _Stream:
    next_expected: int = 1
    parked: dict[int, dict] = field(default_factory=dict)


@dataclass(frozen=True)
class _Segment:
    app_id: str
    seq: int
    records: tuple[LogRecord, ...]
    outcomes: tuple[OutcomeRecord, ...]
    meta: dict | None


def _parse_segment(seg: dict) -> _Segment:
    try:
        app_id = check_token(seg["app_id"], "app id")
        seq = seg["seq"]
        if isinstance(seq, bool) or not isinstance(seq, int) or seq < 1:
            raise InvalidValue(f"segment seq must be a positive integer, got {seq!r}")
        records = tuple(record_from_dict(d) for d in seg.get("records", []))
        outcomes = tuple(OutcomeRecord.from_dict(d) for d in seg.get("outcomes", []))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidValue):
            raise
        raise InvalidValue(f"malformed segment: {exc}") from None
    return _Segment(app_id, seq, records, outcomes, seg.get("meta"))


class CentralServer:
    def __init__(
        self,
        config: ServerConfig | None = None,
        *,
        candidates: dict[str, CandidateList] | None = None,
        clock: Callable[[], int] | None = None,
        probe: Callable[[str], bool] | None = None,
    ):
        self.config = config or ServerConfig()
        if candidates is None and self.config.candidates_path:
            candidates = load_candidates(self.config.candidates_path)
        self.candidates = candidates or {}
        self.clock = clock or (lambda: int(time.time() * 1000))
        self.probe = probe or _http_probe
        self._lock = threading.RLock()
        self._registry: dict[str, RegistryEntry] = {}
        self._streams: dict[str, _Stream] = {}
        self._segments: dict[tuple[str, int], _Segment] = {}
        self._report: dict | None = None

        data = Path(self.config.data_dir) if self.config.data_dir else None
        self._registry_path = data / "registry.json" if data else None
        self.runs = RunStore(data / "runs" if data else None)
        self._segment_log = EventLog(data / "segments.log") if data else None
        if data is not None:
            self._restore()

    # -- persistence ----------------------------------------------------------------

    def _restore(self) -> None:
        if self._registry_path.exists():
            for d in json.loads(self._registry_path.read_text(encoding="utf-8")):
                entry = RegistryEntry.from_dict(d)
                self._registry[entry.record.system_id] = entry
        for raw in self._segment_log.read():
            seg = _parse_segment(raw)
            self._segments[(seg.app_id, seg.seq)] = seg
            stream = self._streams.setdefault(seg.app_id, _Stream())
            stream.next_expected = max(stream.next_expected, seg.seq + 1)

    def _save_registry(self) -> None:
        if self._registry_path is None:
            return
        tmp = self._registry_path.with_suffix(".tmp")
        tmp.write_text(
            json.dumps([e.to_dict() for e in self._registry.values()], indent=1),
            encoding="utf-8",
        )
        os.replace(tmp, self._registry_path)

    # -- auth ---------------------------------------------------------------------------

    def _participant(self, credentials: str | None) -> str:
        if credentials is not None and credentials == self.config.admin_token:
            return LAB_PARTICIPANT
        name = self.config.participants.get(credentials or "")
        if name is None:
            raise AuthFailure("unknown participant token")
        return name

    def _require_admin(self, credentials: str | None) -> None:
        if credentials != self.config.admin_token:
            raise AuthFailure("admin token required")

    # -- registry -------------------------------------------------------------------------

    def register_system(self, record: SystemRecord, credentials: str | None) -> RegistryEntry:
        participant = self._participant(credentials)
        if record.kind is SystemKind.RUN_BACKED and record.run_ref is None:
            record = SystemRecord(record.system_id, record.kind, record.task, None, record.system_id)
        record.validate()
        if record.kind is SystemKind.BASELINE and participant != LAB_PARTICIPANT:
            raise AuthFailure("only the lab registers baseline systems")
        with self._lock:
            if record.system_id in self._registry:
                raise DuplicateSystemId(record.system_id)
            entry = RegistryEntry(record, participant, Status.SUBMITTED, self.clock())
            self._registry[record.system_id] = entry
            self._save_registry()
            logger.info("registered %s for %s", record.system_id, participant)
            return entry

    def entry(self, system_id: str) -> RegistryEntry:
        try:
            return self._registry[system_id]
        except KeyError:
            raise UnknownSystem(system_id) from None

    def upload_run(self, system_id: str, text: str, credentials: str | None) -> RegistryEntry:
        """Attach a run file to a run-backed system and validate it.

        An accepted run moves the entry to ``validated``; otherwise it stays
        ``submitted`` with the validation report attached.
        """
        participant = self._participant(credentials)
        with self._lock:
            entry = self.entry(system_id)
            if participant not in (entry.participant, LAB_PARTICIPANT):
                raise AuthFailure("only the owner may upload a run")
            if entry.record.run_ref is None:
                raise InvalidValue(f"{system_id} is not run-backed")
            if entry.status is not Status.SUBMITTED:
                raise InvalidTransition(entry.status.value, "submitted")
            try:
                rs = parse_run_file(text)
            except RunFormatError as exc:
                entry.report = {"accepted": False, "error": str(exc), "line": exc.lineno}
                self._save_registry()
                return entry
            report = validate_against_candidates(rs, self.candidates)
            entry.report = report.to_dict()
            if report.accepted:
                self.runs.put(entry.record.run_ref, rs)
                entry.status = Status.VALIDATED
            self._save_registry()
            return entry

    def set_status(self, system_id: str, status: Status | str, credentials: str | None) -> RegistryEntry:
        self._require_admin(credentials)
        status = Status(status)
        with self._lock:
            entry = self.entry(system_id)
            if _NEXT_STATUS.get(entry.status) is not status:
                raise InvalidTransition(entry.status.value, status.value)
            rec = entry.record
            if status is Status.VALIDATED:
                if rec.run_ref is not None and rec.run_ref not in self.runs:
                    raise InvalidTransition(entry.status.value, "validated (no accepted run)")
                if rec.endpoint and not self.probe(rec.endpoint):
                    raise InvalidTransition(entry.status.value, "validated (endpoint not answering /test)")
            entry.status = status
            self._save_registry()
            return entry

    def list_systems(self, status: str | None = None, task: str | None = None) -> list[dict]:
        with self._lock:
            entries = list(self._registry.values())
        return [
            e.to_dict()
            for e in entries
            if (status is None or e.status.value == status)
            and (task is None or e.record.task.value == task)
        ]

    def get_run(self, system_id: str) -> str:
        entry = self.entry(system_id)
        rs = self.runs.get(entry.record.run_ref) if entry.record.run_ref else None
        if rs is None:
            raise UnknownSystem(f"{system_id} (no accepted run)")
        return rs.serialize()

    # -- snapshots ------------------------------------------------------------------------------

    def ingest_app_snapshot(self, segment: dict, credentials: str | None = None) -> dict:
        seg = _parse_segment(segment)
        if self.config.app_tokens and self.config.app_tokens.get(credentials or "") != seg.app_id:
            raise AuthFailure(f"bad token for app {seg.app_id!r}")
        with self._lock:
            stream = self._streams.setdefault(seg.app_id, _Stream())
            if seg.seq < stream.next_expected or seg.seq in stream.parked:
                status = "duplicate"
            elif seg.seq > stream.next_expected:
                stream.parked[seg.seq] = segment
                status = "held"
            else:
                self._apply(seg, segment)
                while stream.next_expected in stream.parked:
                    raw = stream.parked.pop(stream.next_expected)
                    self._apply(_parse_segment(raw), raw)
                status = "applied"
            missing = []
            if stream.parked:
                missing = [s for s in range(stream.next_expected, max(stream.parked)) if s not in stream.parked]
            return {
                "status": status,
                "app_id": seg.app_id,
                "seq": seg.seq,
                "next_expected": stream.next_expected,
                "missing": missing,
            }

    def _apply(self, seg: _Segment, raw: dict) -> None:
        if self._segment_log is not None:
            self._segment_log.append(raw)
        self._segments[(seg.app_id, seg.seq)] = seg
        self._streams[seg.app_id].next_expected = seg.seq + 1
        self._report = None

    def applied_segments(self) -> list[tuple[str, int]]:
        with self._lock:
            return sorted(self._segments)

    # -- dashboard ---------------------------------------------------------------------------------

    def build_dashboard_report(self) -> dict:
        with self._lock:
            if self._report is not None:
                return self._report
            keys = sorted(self._segments)
            segments = [self._segments[k] for k in keys]
            entries = list(self._registry.values())
        records = [rec for seg in segments for rec in seg.records]
        outcomes: dict[tuple[str, str], OutcomeRecord] = {}
        meta: dict[str, dict] = {}
        last_seq: dict[str, int] = {}
        for seg in segments:
            for o in seg.outcomes:
                outcomes[(seg.app_id, o.impression_id)] = o
            if seg.meta is not None:
                meta[seg.app_id] = seg.meta
            last_seq[seg.app_id] = seg.seq
        cards = build_scorecards(
            records,
            outcomes.values(),
            [e.record for e in entries],
            self.config.dwell_threshold_ms,
        )
        tables = scorecards_by_task(cards)
        report = {
            "format": REPORT_FORMAT,
            "freshness_ms": max((r.at for r in records), default=None),
            "segments": last_seq,
            "records": len(records),
            "outcomes": len(outcomes),
            "experiments": meta,
            "settings": {"dwell_threshold_ms": self.config.dwell_threshold_ms},
            "systems": [
                {
                    "system_id": e.record.system_id,
                    "participant": e.participant,
                    "kind": e.record.kind.value,
                    "task": e.record.task.value,
                    "status": e.status.value,
                }
                for e in sorted(entries, key=lambda e: e.record.system_id)
            ],
            "tasks": {task: [c.to_dict() for c in rows] for task, rows in tables.items()},
        }
        with self._lock:
            self._report = report
        return report

    def report_json(self) -> str:
        return json.dumps(self.build_dashboard_report(), sort_keys=True, indent=2) + "\n"

    def report_text(self) -> str:
        return format_report_text(self.build_dashboard_report())


def _fmt(x) -> str:
    if x is None:
        return "-"
    return f"{x:.3f}"


def format_report_text(report: dict) -> str:
    lines = [
        "Living lab dashboard",
        f"records: {report['records']}  outcomes: {report['outcomes']}  "
        f"freshness_ms: {report['freshness_ms'] if report['freshness_ms'] is not None else '-'}",
        "",
        "Ad-hoc search (team-draft interleaving vs baseline)",
        f"  {'system':<24}{'wins':>7}{'losses':>8}{'ties':>7}{'pref':>8}{'impr':>8}{'ctr':>8}{'fallbk':>8}",
    ]
    for c in report["tasks"]["adhoc"]:
        lines.append(
            f"  {c['system_id']:<24}{c['wins']:>7}{c['losses']:>8}{c['ties']:>7}"
            f"{_fmt(c['preference_score']):>8}{c['impressions']:>8}{_fmt(c['ctr']):>8}{c['fallbacks']:>8}"
        )
    lines += [
        "",
        "Dataset recommendation (session A/B)",
        f"  {'system':<24}{'impr':>8}{'clicks':>8}{'ctr':>8}{'bounce':>8}{'up':>6}{'down':>6}{'fallbk':>8}",
    ]
    for c in report["tasks"]["recommendation"]:
        lines.append(
            f"  {c['system_id']:<24}{c['impressions']:>8}{c['clicks']:>8}{_fmt(c['ctr']):>8}"
            f"{_fmt(c['bounce_rate']):>8}{c['votes_up']:>6}{c['votes_down']:>6}{c['fallbacks']:>8}"
        )
    return "\n".join(lines) + "\n"


def _http_probe(endpoint: str) -> bool:
    from ..app.endpoint import EndpointClient

    return EndpointClient(endpoint, deadline_ms=2000).alive()
