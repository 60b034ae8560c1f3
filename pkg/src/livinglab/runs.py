"""Pre-computed run submissions, candidate lists and query lists.

Run files use the six-column TREC layout::

    qid Q0 docid rank score tag

Fields are separated by any run of spaces or tabs. Blank lines and lines
starting with ``#`` are skipped. The score column decides the order within a
query; the rank column only breaks score ties. After parsing, ranks are
renumbered 1..n per query, which makes the canonical serialization a
fixed point of parse/serialize.
"""

from __future__ import annotations

import math
import os
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import (
    BadQ0,
    BadRank,
    BadScore,
    BadToken,
    DepthExceeded,
    DuplicateContext,
    DuplicateDocForQuery,
    EmptyCandidates,
    FieldCount,
    MixedTags,
    RunFormatError,
)
from .model import ContextId, DocId, Ranking, is_token

MAX_DEPTH = 1000

_FIELD_SEP = re.compile(r"[ \t]+")
_RANK = re.compile(r"[0-9]+")
_SCORE = re.compile(r"[+-]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")


@dataclass(frozen=True)
class RunLine:
    qid: str
    doc: DocId
    rank: int
    score: float
    tag: str

    def format(self) -> str:
        return f"{self.qid} Q0 {self.doc} {self.rank} {self.score!r} {self.tag}"


def parse_run_line(line: str) -> RunLine:
    fields = _FIELD_SEP.split(line.strip(" \t\r\n"))
    if fields == [""]:
        fields = []
    if len(fields) != 6:
        raise FieldCount(len(fields))
    qid, q0, doc, rank_s, score_s, tag = fields
    if q0 != "Q0":
        raise BadQ0(q0)
    for token in (qid, doc, tag):
        if not is_token(token):
            raise BadToken(token)
    if not _RANK.fullmatch(rank_s) or int(rank_s) < 1:
        raise BadRank(rank_s)
    if not _SCORE.fullmatch(score_s):
        raise BadScore(score_s)
    score = float(score_s)
    if not math.isfinite(score):
        raise BadScore(score_s)
    return RunLine(qid, doc, int(rank_s), score, tag)


@dataclass(frozen=True)
class RunSet:
    """A parsed, normalized run. ``entries`` keeps per-query lines in rank order."""

    tag: str
    entries: Mapping[str, tuple[RunLine, ...]]
    line_count: int

    @property
    def rankings(self) -> dict[str, Ranking]:
        return {
            qid: Ranking(qid, tuple(line.doc for line in lines), self.tag)
            for qid, lines in self.entries.items()
        }

    def ranking(self, qid: str) -> Ranking | None:
        lines = self.entries.get(qid)
        if not lines:
            return None
        return Ranking(qid, tuple(line.doc for line in lines), self.tag)

    def __contains__(self, qid: str) -> bool:
        return qid in self.entries

    def serialize(self) -> str:
        return "".join(
            line.format() + "\n" for lines in self.entries.values() for line in lines
        )


def _normalized(lines: Iterable[tuple[int, RunLine]]) -> tuple[RunLine, ...]:
    # stable sort: line order settles full ties
    ordered = sorted(lines, key=lambda p: (-p[1].score, p[1].rank, p[0]))
    return tuple(
        RunLine(line.qid, line.doc, i, line.score, line.tag)
        for i, (_, line) in enumerate(ordered, start=1)
    )


def normalize(rs: RunSet) -> RunSet:
    entries = {qid: _normalized(enumerate(lines)) for qid, lines in rs.entries.items()}
    return RunSet(rs.tag, entries, rs.line_count)


def parse_run_file(lines: Iterable[str] | str, max_depth: int = MAX_DEPTH) -> RunSet:
    """Parse and normalize a run file given as text or an iterable of lines.

    Errors carry the 1-based line number of the offending line.
    """
    if isinstance(lines, str):
        lines = lines.splitlines()
    tag: str | None = None
    per_query: dict[str, list[tuple[int, RunLine]]] = {}
    seen: set[tuple[str, str]] = set()
    count = 0
    for lineno, raw in enumerate(lines, start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            line = parse_run_line(raw)
        except RunFormatError as exc:
            raise exc.at_line(lineno) from None
        if tag is None:
            tag = line.tag
        elif line.tag != tag:
            raise MixedTags(sorted({tag, line.tag}), lineno)
        if (line.qid, line.doc) in seen:
            raise DuplicateDocForQuery(line.qid, line.doc, lineno)
        seen.add((line.qid, line.doc))
        bucket = per_query.setdefault(line.qid, [])
        if len(bucket) >= max_depth:
            raise DepthExceeded(line.qid, max_depth, lineno)
        bucket.append((lineno, line))
        count += 1
    if tag is None:
        raise RunFormatError("run file contains no run lines")
    entries = {qid: _normalized(bucket) for qid, bucket in per_query.items()}
    return RunSet(tag, entries, count)


def read_run_file(path: str | os.PathLike, max_depth: int = MAX_DEPTH) -> RunSet:
    with open(path, encoding="utf-8") as fh:
        return parse_run_file(fh, max_depth=max_depth)


# -- candidate and query lists ---------------------------------------------------


@dataclass(frozen=True)
class CandidateList:
    context: ContextId
    candidates: tuple[DocId, ...]

    def __post_init__(self):
        if not isinstance(self.candidates, tuple):
            object.__setattr__(self, "candidates", tuple(self.candidates))

    def __len__(self) -> int:
        return len(self.candidates)

    def __contains__(self, doc: DocId) -> bool:
        return doc in self.as_set

    @property
    def as_set(self) -> frozenset[DocId]:
        return frozenset(self.candidates)

    def format(self) -> str:
        return f"{self.context}\t{' '.join(self.candidates)}"


def _split_tab_line(raw: str, lineno: int) -> tuple[str, str]:
    line = raw.rstrip("\r\n")
    if "\t" not in line:
        raise RunFormatError("expected '<id><TAB>...'", lineno)
    key, rest = line.split("\t", 1)
    if not is_token(key):
        raise BadToken(key, lineno)
    return key, rest


def parse_candidates(lines: Iterable[str] | str) -> dict[ContextId, CandidateList]:
    if isinstance(lines, str):
        lines = lines.splitlines()
    out: dict[ContextId, CandidateList] = {}
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        context, rest = _split_tab_line(raw, lineno)
        if context in out:
            raise DuplicateContext(context, lineno)
        docs = rest.split()
        if not docs:
            raise EmptyCandidates(context, lineno)
        if len(set(docs)) != len(docs):
            dup = next(d for d in docs if docs.count(d) > 1)
            raise RunFormatError(f"candidate {dup!r} listed twice for {context!r}", lineno)
        for doc in docs:
            if not is_token(doc):
                raise BadToken(doc, lineno)
        out[context] = CandidateList(context, tuple(docs))
    return out


def parse_queries(lines: Iterable[str] | str) -> dict[str, str]:
    if isinstance(lines, str):
        lines = lines.splitlines()
    out: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        qid, text = _split_tab_line(raw, lineno)
        if qid in out:
            raise DuplicateContext(qid, lineno)
        text = text.strip()
        if not text:
            raise RunFormatError(f"query {qid!r} has no text", lineno)
        out[qid] = text
    return out


def load_candidates(path: str | os.PathLike) -> dict[ContextId, CandidateList]:
    with open(path, encoding="utf-8") as fh:
        return parse_candidates(fh)


def load_queries(path: str | os.PathLike) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        return parse_queries(fh)


def format_candidates(cl: Mapping[ContextId, CandidateList]) -> str:
    return "".join(c.format() + "\n" for c in cl.values())


def format_queries(queries: Mapping[str, str]) -> str:
    return "".join(f"{qid}\t{text}\n" for qid, text in queries.items())


# -- validation -------------------------------------------------------------------


@dataclass(frozen=True)
class QueryReport:
    qid: str
    n_docs: int
    has_candidates: bool
    out_of_candidates: tuple[DocId, ...] = ()
    matched: int = 0
    n_candidates: int = 0

    @property
    def coverage(self) -> float | None:
        """Fraction of the candidate list the run ranks."""
        if not self.has_candidates:
            return None
        return self.matched / self.n_candidates


@dataclass(frozen=True)
class ValidationReport:
    tag: str
    queries: tuple[QueryReport, ...] = field(default_factory=tuple)

    @property
    def accepted(self) -> bool:
        return not any(q.out_of_candidates for q in self.queries)

    @property
    def partial(self) -> bool:
        return any(not q.has_candidates for q in self.queries)

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "accepted": self.accepted,
            "partial": self.partial,
            "queries": [
                {
                    "qid": q.qid,
                    "n_docs": q.n_docs,
                    "has_candidates": q.has_candidates,
                    "out_of_candidates": list(q.out_of_candidates),
                    "matched": q.matched,
                    "n_candidates": q.n_candidates,
                    "coverage": q.coverage,
                }
                for q in self.queries
            ],
        }

    def to_text(self) -> str:
        lines = [
            f"run: {self.tag}",
            f"status: {'accepted' if self.accepted else 'rejected'}"
            + (" (partial: some queries have no candidate list)" if self.partial else ""),
            f"queries: {len(self.queries)}",
        ]
        for q in self.queries:
            if not q.has_candidates:
                lines.append(f"  {q.qid}: docs={q.n_docs} candidates=unknown")
                continue
            line = f"  {q.qid}: docs={q.n_docs} coverage={q.matched}/{q.n_candidates}"
            if q.out_of_candidates:
                line += " out_of_candidates=" + ",".join(q.out_of_candidates)
            lines.append(line)
        return "\n".join(lines) + "\n"


def validate_against_candidates(
    rs: RunSet, cl: Mapping[ContextId, CandidateList]
) -> ValidationReport:
    reports = []
    for qid, lines in rs.entries.items():
        docs = [line.doc for line in lines]
        cands = cl.get(qid)
        if cands is None:
            reports.append(QueryReport(qid, len(docs), False))
            continue
        allowed = cands.as_set
        outside = tuple(sorted(d for d in docs if d not in allowed))
        reports.append(
            QueryReport(
                qid,
                len(docs),
                True,
                outside,
                len(docs) - len(outside),
                len(allowed),
            )
        )
    return ValidationReport(rs.tag, tuple(reports))


class RunStore:
    """Read-mostly store of accepted runs keyed by run reference.

    Writers replace the whole mapping, so readers always see a consistent
    snapshot without locking. With ``directory`` set, runs are also written
    there in canonical form and reloaded on construction.
    """

    def __init__(self, directory: str | os.PathLike | None = None):
        self._runs: dict[str, RunSet] = {}
        self._write_lock = threading.Lock()
        self.directory = Path(directory) if directory is not None else None
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
            for p in sorted(self.directory.glob("*.run")):
                self._runs[p.stem] = read_run_file(p)

    def put(self, ref: str, rs: RunSet) -> None:
        with self._write_lock:
            if self.directory is not None:
                tmp = self.directory / f".{ref}.run.tmp"
                tmp.write_text(rs.serialize(), encoding="utf-8")
                os.replace(tmp, self.directory / f"{ref}.run")
            runs = dict(self._runs)
            runs[ref] = rs
            self._runs = runs

    def get(self, ref: str) -> RunSet | None:
        return self._runs.get(ref)

    def __contains__(self, ref: str) -> bool:
        return ref in self._runs

    def refs(self) -> list[str]:
        return sorted(self._runs)
