import pytest
from hypothesis import given
from hypothesis import strategies as st

from livinglab.errors import DuplicateDoc, EmptyRanking, InvalidValue
from livinglab.model import (
    EventKind,
    FeedbackEvent,
    ImpressionRecord,
    Outcome,
    OutcomeRecord,
    Ranking,
    Session,
    SystemKind,
    SystemRecord,
    Task,
    TeamLabel,
    is_token,
    record_from_dict,
    record_to_dict,
    validate_ranking,
)

tokens = st.text(
    alphabet=st.characters(min_codepoint=33, max_codepoint=126), min_size=1, max_size=12
)


def test_validate_ranking_examples():
    validate_ranking(Ranking("q1", ("d1", "d2", "d3"), "s"))
    with pytest.raises(DuplicateDoc) as exc:
        validate_ranking(Ranking("q1", ("d1", "d1"), "s"))
    assert exc.value.doc_id == "d1"
    with pytest.raises(EmptyRanking):
        validate_ranking(Ranking("q1", (), "s"))


def test_tokens():
    assert is_token("teamX-bm25ish")
    for bad in ("", "a b", "tab\t", "nl\n", None, 3):
        assert not is_token(bad)


def test_system_record_rules():
    SystemRecord("b", SystemKind.BASELINE, Task.ADHOC).validate()
    with pytest.raises(InvalidValue):
        SystemRecord("x", SystemKind.ENDPOINT_BACKED, Task.ADHOC).validate()
    with pytest.raises(InvalidValue):
        SystemRecord("x", SystemKind.RUN_BACKED, Task.ADHOC).validate()
    with pytest.raises(InvalidValue):
        SystemRecord.from_dict({"system_id": "x", "kind": "nope", "task": "adhoc"})


def test_feedback_event_rules():
    with pytest.raises(InvalidValue):
        FeedbackEvent("e", "s", "i", EventKind.CLICK, 0).validate()  # click without doc
    with pytest.raises(InvalidValue):
        FeedbackEvent("e", "s", "i", EventKind.VOTE_UP, 0).validate()
    with pytest.raises(InvalidValue):
        FeedbackEvent("e", "s", "i", EventKind.CLICK, 0, 0, "d").validate()
    with pytest.raises(InvalidValue):
        FeedbackEvent.from_dict({"event_id": "e", "session_id": "s", "kind": "click"})
    FeedbackEvent("e", "s", "i", EventKind.PAGE_LEAVE, 0).validate()


def test_session_time_order():
    ev = lambda i, at: FeedbackEvent(f"e{i}", "s", "i", EventKind.PAGE_LEAVE, at)
    Session("s", 0, [ev(1, 5), ev(2, 5), ev(3, 9)]).validate()
    with pytest.raises(InvalidValue):
        Session("s", 0, [ev(1, 9), ev(2, 5)]).validate()


def test_impression_alignment():
    with pytest.raises(InvalidValue):
        ImpressionRecord("i", "s", Task.ADHOC, "q", ("a", "b"), ("x",), ("x",), "x", 0).validate()
    with pytest.raises(InvalidValue):
        ImpressionRecord("i", "s", Task.ADHOC, "q", ("a",), ("y",), ("x",), "x", 0).validate()
    imp = ImpressionRecord("i", "s", Task.ADHOC, "q", ("a", "b"), ("x", "x"), ("x",), "x", 0)
    assert imp.position_of("b") == 2 and imp.position_of("z") is None


@given(st.lists(tokens, min_size=1, max_size=8, unique=True), tokens, tokens)
def test_ranking_roundtrip(items, context, source):
    r = Ranking(context, tuple(items), source)
    assert Ranking.from_dict(r.to_dict()) == r


@given(
    tokens, tokens, tokens,
    st.sampled_from(list(EventKind)[1:]),
    st.integers(0, 2**50),
    st.integers(1, 50),
    tokens,
)
def test_event_roundtrip(eid, sid, iid, kind, at, pos, doc):
    ev = FeedbackEvent(eid, sid, iid, kind, at, pos, doc)
    assert record_from_dict(record_to_dict(ev)) == ev


@given(st.lists(tokens, min_size=1, max_size=10, unique=True), st.booleans(), st.data())
def test_impression_roundtrip(items, interleaved, data):
    teams = (
        tuple(data.draw(st.sampled_from(list(TeamLabel))) for _ in items) if interleaved else None
    )
    served = tuple("base" if t is None or t is TeamLabel.BASELINE else "exp"
                   for t in (teams or (None,) * len(items)))
    rec = ImpressionRecord("imp-1", "s1", Task.ADHOC, "q1", tuple(items), served,
                           ("base", "exp"), "exp", 1, teams,
                           data.draw(st.booleans()), data.draw(st.none() | tokens))
    assert record_from_dict(record_to_dict(rec)) == rec


def test_outcome_and_session_roundtrip():
    o = OutcomeRecord("i1", "b", "e", Outcome.WIN_BASELINE)
    assert OutcomeRecord.from_dict(o.to_dict()) == o
    s = Session("s", 10, [FeedbackEvent("e1", "s", "i", EventKind.CLICK, 11, 1, "d")])
    assert Session.from_dict(s.to_dict()) == s
    rec = SystemRecord("t", SystemKind.RUN_BACKED, Task.RECOMMENDATION, run_ref="t")
    assert SystemRecord.from_dict(rec.to_dict()) == rec
