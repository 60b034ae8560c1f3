"""Exception hierarchy shared by all livinglab modules."""

from __future__ import annotations


class LivingLabError(Exception):
    """Base class for every error raised by this package."""


# -- core model ---------------------------------------------------------------


class InvalidValue(LivingLabError, ValueError):
    """A domain value violates one of its invariants."""


class DuplicateDoc(InvalidValue):
    def __init__(self, doc_id: str):
        super().__init__(f"duplicate document {doc_id!r} in ranking")
        self.doc_id = doc_id


class EmptyRanking(InvalidValue):
    def __init__(self):
        super().__init__("ranking is empty")


# -- run ingest ---------------------------------------------------------------


class RunFormatError(LivingLabError, ValueError):
    """Malformed run, candidate or query file. ``lineno`` is 1-based when known."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        self.detail = message
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)

    def at_line(self, lineno: int) -> "RunFormatError":
        self.lineno = lineno
        self.args = (f"line {lineno}: {self.detail}",)
        return self


class FieldCount(RunFormatError):
    def __init__(self, n: int, lineno: int | None = None):
        self.n = n
        super().__init__(f"expected 6 fields, got {n}", lineno)


class BadQ0(RunFormatError):
    def __init__(self, token: str, lineno: int | None = None):
        super().__init__(f"second field must be 'Q0', got {token!r}", lineno)


class BadRank(RunFormatError):
    def __init__(self, token: str, lineno: int | None = None):
        super().__init__(f"rank must be a positive integer, got {token!r}", lineno)


class BadScore(RunFormatError):
    def __init__(self, token: str, lineno: int | None = None):
        super().__init__(f"score must be a finite number, got {token!r}", lineno)


class BadToken(RunFormatError):
    def __init__(self, token: str, lineno: int | None = None):
        super().__init__(f"invalid identifier {token!r}", lineno)


class DuplicateDocForQuery(RunFormatError):
    def __init__(self, qid: str, doc: str, lineno: int | None = None):
        self.qid, self.doc = qid, doc
        super().__init__(f"document {doc!r} appears twice for query {qid!r}", lineno)


class MixedTags(RunFormatError):
    def __init__(self, tags, lineno: int | None = None):
        self.tags = tuple(tags)
        super().__init__(f"more than one run tag in file: {', '.join(self.tags)}", lineno)


class DepthExceeded(RunFormatError):
    def __init__(self, qid: str, limit: int, lineno: int | None = None):
        self.qid = qid
        super().__init__(f"query {qid!r} has more than {limit} lines", lineno)


class DuplicateContext(RunFormatError):
    def __init__(self, context: str, lineno: int | None = None):
        self.context = context
        super().__init__(f"context {context!r} listed twice", lineno)


class EmptyCandidates(RunFormatError):
    def __init__(self, context: str, lineno: int | None = None):
        self.context = context
        super().__init__(f"context {context!r} has no candidates", lineno)


# -- interleaving / feedback ----------------------------------------------------


class ContextMismatch(LivingLabError, ValueError):
    def __init__(self, a: str, b: str):
        super().__init__(f"rankings concern different contexts: {a!r} vs {b!r}")


class UnknownClickedDoc(LivingLabError, ValueError):
    def __init__(self, doc: str):
        self.doc = doc
        super().__init__(f"clicked document {doc!r} is not part of the impression")


class UnknownImpression(LivingLabError, KeyError):
    def __init__(self, impression_id: str):
        self.impression_id = impression_id
        super().__init__(f"unknown impression {impression_id!r}")

    def __str__(self) -> str:
        return self.args[0]


class InvalidEvent(LivingLabError, ValueError):
    """Feedback event is inconsistent with its impression."""


# -- site app -------------------------------------------------------------------


class NoBaseline(LivingLabError):
    """The baseline system could not produce a ranking."""


class SystemCallError(LivingLabError):
    """An experimental system failed; callers fall back to the baseline."""


class EndpointTimeout(SystemCallError):
    pass


class MalformedResponse(SystemCallError):
    pass


class OutOfCandidates(SystemCallError):
    def __init__(self, docs):
        self.docs = tuple(docs)
        super().__init__(f"documents outside the candidate list: {', '.join(self.docs)}")


class NotCovered(SystemCallError):
    """A run-backed system has no ranking for the requested context."""


# -- central server -------------------------------------------------------------


class DuplicateSystemId(LivingLabError):
    def __init__(self, system_id: str):
        self.system_id = system_id
        super().__init__(f"system {system_id!r} is already registered")


class UnknownSystem(LivingLabError, KeyError):
    def __init__(self, system_id: str):
        super().__init__(f"unknown system {system_id!r}")

    def __str__(self) -> str:
        return self.args[0]


class AuthFailure(LivingLabError):
    pass


class InvalidTransition(LivingLabError):
    def __init__(self, old: str, new: str):
        super().__init__(f"status cannot move from {old!r} to {new!r}")
