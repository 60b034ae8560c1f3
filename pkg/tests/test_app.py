import time
from collections import Counter

import httpx
import pytest

from livinglab.app import AppConfig, SiteApp
from livinglab.assignment import assign_session
from livinglab.app.core import RankingRequest, RecommendationRequest
from livinglab.app.http import AppService
from livinglab.errors import InvalidEvent, NoBaseline, UnknownClickedDoc, UnknownImpression
from livinglab.eventlog import EventLog, read_log
from livinglab.model import EventKind, FeedbackEvent, SystemKind, SystemRecord, Task
from livinglab.runs import RunStore, parse_run_file
from livinglab.sim import StubSystem, candidate_order, make_run, relevance_ranker, shuffled_ranker
from livinglab.sim.systems import LocalTransport

BASE = SystemRecord("base", SystemKind.BASELINE, Task.ADHOC, "http://base.stub")
RBASE = SystemRecord("rbase", SystemKind.BASELINE, Task.RECOMMENDATION)
REL = SystemRecord("rel", SystemKind.ENDPOINT_BACKED, Task.ADHOC, "http://rel.stub")
RUN = SystemRecord("runsys", SystemKind.RUN_BACKED, Task.ADHOC, run_ref="runsys")
RECRUN = SystemRecord("recrun", SystemKind.RUN_BACKED, Task.RECOMMENDATION, run_ref="recrun")
RECEP = SystemRecord("recep", SystemKind.ENDPOINT_BACKED, Task.RECOMMENDATION, "http://rel.stub")


def make_app(world, systems=(REL, RUN), log=None, stubs=None, covered=None, **cfg):
    stubs = stubs or {
        "http://base.stub": StubSystem("base", shuffled_ranker(world, 1)),
        "http://rel.stub": StubSystem("rel", relevance_ranker(world)),
    }
    runs = RunStore()
    qids = list(world.queries)
    covered = qids[: len(qids) // 2] if covered is None else covered
    runs.put("runsys", parse_run_file(make_run(relevance_ranker(world), covered, "runsys")))
    runs.put("recrun", parse_run_file(make_run(candidate_order(world), world.seeds[:3], "recrun")))
    config = AppConfig(app_id="t", baselines={Task.ADHOC: BASE, Task.RECOMMENDATION: RBASE},
                       systems=list(systems), **cfg)
    return SiteApp(config, log=log if log is not None else EventLog(), runs=runs, candidates=dict(world.candidates),
                   queries=dict(world.queries), transport=LocalTransport(stubs))


def test_ranking_happy_path(small_world):
    app = make_app(small_world, systems=(RUN,))
    payload = app.handle_ranking(RankingRequest("s1", "q0001", page_size=6))
    assert set(payload) == {"impression_id", "query_id", "itemlist", "skip"}
    assert len(payload["itemlist"]) == 6
    rec = app.log.read()[-1]
    assert rec["teams"] is not None and not rec["fallback"]
    assert set(rec["systems"]) == {"base", "runsys"}


def test_uncovered_query_falls_back(small_world):
    app = make_app(small_world, systems=(RUN,))
    payload = app.handle_ranking(RankingRequest("s1", "q0008"))
    rec = app.log.read()[-1]
    assert rec["fallback"] and rec["fallback_reason"] == "NotCovered" and rec["teams"] is None
    assert rec["systems"] == ["base"] and rec["arm"] == "runsys"
    base = shuffled_ranker(small_world, 1)("q0008")
    assert payload["itemlist"] == base[:10]
    assert app.outcome(payload["impression_id"]) is None


def test_query_text_lookup(small_world):
    app = make_app(small_world, systems=(RUN,))
    text = small_world.queries["q0002"]
    assert app.handle_ranking(RankingRequest("s1", None, text))["query_id"] == "q0002"
    # the shuffled baseline stub only knows listed contexts: free text fails the baseline
    with pytest.raises(NoBaseline):
        app.handle_ranking(RankingRequest("s1", None, "no such query words"))
    stubs = {"http://base.stub": StubSystem("any", lambda context: ["x", "y", "z"])}
    app = make_app(small_world, systems=(RUN,), stubs=stubs)
    unknown = app.handle_ranking(RankingRequest("s1", None, "no such query words"))
    assert unknown["query_id"] is None and unknown["itemlist"] == ["x", "y", "z"]
    rec = app.log.read()[-1]
    assert rec["context"].startswith("text-") and rec["fallback_reason"] == "NotCovered"


def test_missing_baseline(small_world):
    app = make_app(small_world)
    app.set_systems([REL], baselines={})
    with pytest.raises(NoBaseline):
        app.handle_ranking(RankingRequest("s1", "q0001"))


def test_round_robin_split(small_world):
    c = SystemRecord("rel2", SystemKind.ENDPOINT_BACKED, Task.ADHOC, "http://rel.stub")
    app = make_app(small_world, systems=(REL, RUN, c), covered=list(small_world.queries))
    for n in range(31):
        app.handle_ranking(RankingRequest(f"s{n}", "q0003"))
    arms = Counter(r["arm"] for r in app.log.read())
    assert sorted(arms.values()) == [10, 10, 11]


def test_payloads_are_blind_and_logged_once(small_world):
    app = make_app(small_world, systems=(REL, RECEP))
    ids = []
    for n in range(20):
        p = app.handle_ranking(RankingRequest(f"s{n}", "q0004"))
        assert "teams" not in p and "arm" not in p and "system" not in str(p)
        ids.append(p["impression_id"])
        r = app.handle_recommendation(RecommendationRequest("p0001", f"s{n}", 5))
        assert set(r) == {"impression_id", "item_id", "itemlist", "skip"}
        ids.append(r["impression_id"])
    logged = Counter(d["impression_id"] for d in app.log.read() if d["type"] == "impression")
    assert all(logged[i] == 1 for i in ids) and len(logged) == len(ids)


def test_recommendation_session_stickiness(small_world):
    app = make_app(small_world, systems=(RECEP, RECRUN))
    assert set(app.experiment.arms) == {"rbase", "recep", "recrun"}
    for sid in ("s1", "s2", "s3", "s4"):
        arms = {
            (app.handle_recommendation(RecommendationRequest("p0001", sid, 5)), app.log.read()[-1]["arm"])[1]
            for _ in range(5)
        }
        assert len(arms) == 1


def test_recommendation_skip_and_fallback(small_world):
    from livinglab.runs import CandidateList

    app = make_app(small_world, systems=(RECRUN,))
    app.candidates["tiny"] = CandidateList("tiny", ("x1", "x2"))
    assert app.handle_recommendation(RecommendationRequest("tiny", "s1", 5))["skip"] is True
    # a session assigned to the run-backed arm; p0008 is not in the run
    sid = next(f"u{i}" for i in range(100) if assign_session(f"u{i}", app.experiment) == "recrun")
    payload = app.handle_recommendation(RecommendationRequest("p0008", sid, 4))
    rec = app.log.read()[-1]
    assert payload["skip"] is False and len(payload["itemlist"]) == 4
    assert rec["fallback"] and rec["arm"] == "recrun" and rec["systems"] == ["rbase"]
    assert payload["itemlist"] == list(small_world.candidates["p0008"].candidates[:4])


def test_recommendation_k_is_clamped(small_world):
    app = make_app(small_world, systems=())
    assert len(app.handle_recommendation(RecommendationRequest("p0001", "s", 1))["itemlist"]) == 3
    assert len(app.handle_recommendation(RecommendationRequest("p0001", "s", 50))["itemlist"]) == 10


def test_feedback_examples(small_world):
    app = make_app(small_world)
    p = app.handle_ranking(RankingRequest("s1", "q0001"))
    iid, items = p["impression_id"], p["itemlist"]
    n = len(app.log)
    ev = FeedbackEvent("e1", "s1", iid, EventKind.CLICK, 1, 2, items[1])
    assert app.record_feedback(ev)["status"] == "ok"
    assert len(app.log) == n + 1
    assert app.record_feedback(ev)["status"] == "duplicate"
    assert len(app.log) == n + 1
    with pytest.raises(UnknownClickedDoc):
        app.record_feedback(FeedbackEvent("e2", "s1", iid, EventKind.CLICK, 1, 1, "nope"))
    with pytest.raises(UnknownImpression):
        app.record_feedback(FeedbackEvent("e3", "s1", "missing", EventKind.PAGE_LEAVE, 1))
    with pytest.raises(InvalidEvent):
        app.record_feedback(FeedbackEvent("e4", "s1", iid, EventKind.CLICK, 1, 1, items[1]))
    with pytest.raises(InvalidEvent):
        app.record_feedback(FeedbackEvent("e5", "s1", iid, EventKind.IMPRESSION, 1))


def test_outcome_tracks_clicks(small_world):
    app = make_app(small_world, systems=(REL,))
    p = app.handle_ranking(RankingRequest("s1", "q0001"))
    rec = app.log.read()[-1]
    assert app.outcome(p["impression_id"]).value == "tie"
    exp_pos = rec["teams"].index("experimental")
    app.record_feedback(FeedbackEvent("e1", "s1", p["impression_id"], EventKind.CLICK, 1,
                                      exp_pos + 1, rec["items"][exp_pos]))
    assert app.outcome(p["impression_id"]).value == "win_experimental"


def test_restart_replays_state(small_world, tmp_path):
    path = tmp_path / "app.log"
    app = make_app(small_world, systems=(REL,), log=EventLog(path), log_path=str(path))
    p = app.handle_ranking(RankingRequest("s1", "q0001"))
    rec = app.log.read()[-1]
    pos = rec["teams"].index("baseline")
    ev = FeedbackEvent("e1", "s1", p["impression_id"], EventKind.CLICK, 1, pos + 1, rec["items"][pos])
    app.record_feedback(ev)
    seg = app.cut_segment()
    app.log.close()

    again = make_app(small_world, systems=(REL,), log=EventLog(path), log_path=str(path))
    assert again.outcome(p["impression_id"]).value == "win_baseline"
    assert again.record_feedback(ev)["status"] == "duplicate"
    assert again.pending_segments() == [seg]
    p2 = again.handle_ranking(RankingRequest("s2", "q0001"))
    assert p2["impression_id"] == "t-00000002"
    assert again.cut_segment()["seq"] == 2


def test_segments_and_acknowledgement(small_world):
    app = make_app(small_world, systems=(REL,))
    assert app.cut_segment() is None
    app.handle_ranking(RankingRequest("s1", "q0001"))
    s1 = app.cut_segment()
    app.handle_ranking(RankingRequest("s1", "q0002"))
    s2 = app.cut_segment()
    assert (s1["seq"], s2["seq"]) == (1, 2)
    assert len(s1["records"]) == len(s2["records"]) == 1
    assert len(s1["outcomes"]) == 1 and s1["meta"]["app_id"] == "t"
    app.acknowledge(2)
    assert [s["seq"] for s in app.pending_segments()] == [2]


def test_timeout_serves_baseline_within_a_second(small_world):
    slow = StubSystem("slow", relevance_ranker(small_world), delay=1.5)
    base = StubSystem("base", shuffled_ranker(small_world, 1))
    with slow.service() as ssvc, base.service() as bsvc:
        config = AppConfig(
            app_id="t", deadline_ms=800,
            baselines={Task.ADHOC: SystemRecord("base", SystemKind.BASELINE, Task.ADHOC, bsvc.url)},
            systems=[SystemRecord("slow", SystemKind.ENDPOINT_BACKED, Task.ADHOC, ssvc.url)],
        )
        app = SiteApp(config, candidates=dict(small_world.candidates), queries=dict(small_world.queries))
        app.handle_ranking(RankingRequest("warm", "q0002"))  # open connections
        with AppService(app) as svc:
            start = time.monotonic()
            r = httpx.get(svc.url + "/ranking", params={"query_id": "q0001", "session_id": "s1"})
            elapsed = time.monotonic() - start
        assert r.status_code == 200 and elapsed < 1.0
        assert r.json()["itemlist"] == shuffled_ranker(small_world, 1)("q0001")[:10]
        rec = app.log.read()[-1]
        assert rec["fallback"] and rec["fallback_reason"] == "EndpointTimeout"


def test_http_surface(small_world):
    app = make_app(small_world, systems=(REL, RECEP))
    with AppService(app) as svc, httpx.Client(base_url=svc.url) as http:
        r = http.get("/ranking", params={"query_id": "q0001", "session_id": "s1", "page_size": 4, "ts": 7})
        assert r.status_code == 200
        body = r.json()
        assert len(body["itemlist"]) == 4 and app.log.read()[-1]["at"] == 7
        r = http.get("/recommendation/datasets", params={"item_id": "p0001", "session_id": "s1", "k": 3})
        assert r.status_code == 200 and len(r.json()["itemlist"]) == 3
        ev = {"event_id": "e1", "session_id": "s1", "impression_id": body["impression_id"],
              "kind": "click", "at": 9, "position": 1, "doc": body["itemlist"][0]}
        assert http.post("/feedback", json=ev).json()["status"] == "ok"
        assert http.post("/feedback", json=ev).json()["status"] == "duplicate"
        bad = dict(ev, event_id="e2", doc="nope")
        r = http.post("/feedback", json=bad)
        assert r.status_code == 400 and r.json()["kind"] == "UnknownClickedDoc"
        assert http.post("/feedback", json=dict(ev, event_id="e3", impression_id="x")).status_code == 404
        assert http.post("/feedback", content=b"not json").status_code == 400
        assert http.get("/ranking", params={"session_id": "s1"}).status_code == 400
        assert http.get("/ranking", params={"query_id": "q1", "session_id": "s", "page_size": "x"}).status_code == 400
        assert http.get("/nope").status_code == 404
        health = http.get("/healthz").json()
        assert health["status"] == "ok" and health["impressions"] == 2
        assert http.post("/admin/flush").json() == {"pushed": 0, "cut": True}


def test_http_503_without_baseline(small_world):
    app = make_app(small_world)
    app.set_systems([REL], baselines={})
    with AppService(app) as svc:
        assert httpx.get(svc.url + "/ranking", params={"query_id": "q0001", "session_id": "s"}).status_code == 503


def test_config_file_and_from_config(small_world, tmp_path):
    import json

    from livinglab.runs import format_candidates, format_queries

    (tmp_path / "cands.tsv").write_text(format_candidates(small_world.candidates))
    (tmp_path / "queries.tsv").write_text(format_queries(small_world.queries))
    (tmp_path / "r.run").write_text(make_run(relevance_ranker(small_world), ["q0001"], "teamR"))
    (tmp_path / "app.json").write_text(json.dumps({
        "app_id": "cfg", "candidates": "cands.tsv", "queries": "queries.tsv", "log_path": "var/app.log",
        "baselines": {"adhoc": {"system_id": "b"}, "recommendation": {"system_id": "rb"}},
        "systems": [{"system_id": "teamR", "task": "adhoc", "run": "r.run"}],
    }))
    config = AppConfig.load(tmp_path / "app.json")
    assert config.run_paths == {"teamR": str(tmp_path / "r.run")}
    app = SiteApp.from_config(config)
    p = app.handle_ranking(RankingRequest("s", "q0001"))
    assert len(p["itemlist"]) == 10
    app.log.close()
    assert read_log(tmp_path / "var" / "app.log")[0]["systems"] == ["b", "teamR"]
