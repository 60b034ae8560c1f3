"""Independent reference implementations used as test oracles.

Nothing here imports the package's algorithms; each oracle is written from
the textual definition so that agreement is evidence, not tautology.
"""

from __future__ import annotations

import functools
import itertools
import json
from collections import defaultdict
from pathlib import Path

FIXTURES = Path(__file__).parent / "fixtures"


def load_jsonl(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


# -- team-draft interleaving ----------------------------------------------------------


def tdi_reference(a, b, coins, target):
    """Round-based team draft, written as a literal reading of the rule.

    ``a`` is the baseline team, ``b`` the experimental team; a True coin lets
    ``a`` pick first. Returns (docs, teams, coins_used) with teams as "A"/"B".
    """
    out, teams, used = [], [], 0

    def best(lst):
        for d in lst:
            if d not in out:
                return d
        return None

    while len(out) < target and (best(a) is not None or best(b) is not None):
        first = coins[used]
        used += 1
        for team in (("A", "B") if first else ("B", "A")):
            if len(out) == target:
                break
            d = best(a if team == "A" else b)
            if d is not None:
                out.append(d)
                teams.append(team)
    return out, teams, used


def all_rankings(universe, max_len=None):
    """Every ordered selection (without repeats) of 1..max_len docs from ``universe``."""
    max_len = len(universe) if max_len is None else max_len
    for n in range(1, max_len + 1):
        yield from itertools.permutations(universe, n)


# -- click-model expectations ------------------------------------------------------------


def cascade_win_loss(teams, attractiveness, continuation):
    """Exact P(experimental wins), P(baseline wins) for one interleaved list.

    Cascade user: scan top-down, click position i with probability a_i, after a
    click continue scanning with probability ``continuation``. Dynamic program
    over (still scanning, experimental clicks - baseline clicks).
    """
    scanning = {0: 1.0}  # diff -> probability mass, user still scanning
    stopped = defaultdict(float)
    for team, a in zip(teams, attractiveness):
        nxt = defaultdict(float)
        step = 1 if team == "experimental" else -1
        for diff, p in scanning.items():
            nxt[diff] += p * (1 - a)
            nxt[diff + step] += p * a * continuation
            stopped[diff + step] += p * a * (1 - continuation)
        scanning = nxt
    for diff, p in scanning.items():
        stopped[diff] += p
    win = sum(p for d, p in stopped.items() if d > 0)
    loss = sum(p for d, p in stopped.items() if d < 0)
    return win, loss


def expected_preference(contexts, baseline_fn, experimental_fn, attract_fn, continuation, page):
    """Limit of wins / (wins + losses) with contexts drawn uniformly.

    Averages over every coin sequence of length ``page`` (an upper bound on
    the rounds needed), each with probability 2**-page.
    """
    total_win = total_loss = 0.0
    for c in contexts:
        a, b = baseline_fn(c), experimental_fn(c)
        seen = {}
        for coins in itertools.product((True, False), repeat=page):
            docs, teams, used = tdi_reference(a, b, coins, page)
            key = coins[:used]
            if key in seen:
                continue
            seen[key] = None
            lab = ["baseline" if t == "A" else "experimental" for t in teams]
            w, l = cascade_win_loss(lab, [attract_fn(c, d) for d in docs], continuation)
            weight = 2.0 ** -used
            total_win += weight * w
            total_loss += weight * l
    return total_win / (total_win + total_loss)


# -- run files ----------------------------------------------------------------------------


def normalize_reference(lines):
    """Sort oracle: per qid, score descending, then original rank, then line order.

    ``lines`` are (qid, doc, rank, score) in file order. Returns
    {qid: [(doc, new_rank, score), ...]}.
    """
    per_q = defaultdict(list)
    for idx, (qid, doc, rank, score) in enumerate(lines):
        per_q[qid].append((idx, doc, rank, score))

    def cmp(x, y):
        if x[3] != y[3]:
            return -1 if x[3] > y[3] else 1
        if x[2] != y[2]:
            return -1 if x[2] < y[2] else 1
        return -1 if x[0] < y[0] else (1 if x[0] > y[0] else 0)

    return {
        qid: [(doc, i, score) for i, (_, doc, _, score) in
              enumerate(sorted(rows, key=functools.cmp_to_key(cmp)), start=1)]
        for qid, rows in per_q.items()
    }


# -- metrics -------------------------------------------------------------------------------

COUNT_KEYS = ("impressions", "clicks", "clicked_visits", "bounces", "votes_up",
              "votes_down", "wins", "losses", "ties", "fallbacks")


def recount(raw_records, dwell_threshold_ms=10_000):
    """Single pass over a raw (dict) log, returning {system_id: {count: n}}.

    Requires each session's records to appear in non-decreasing time order,
    which lets a pending click be resolved by the next record of its session.
    Outcomes are re-derived from clicks here as well.
    """
    counts = defaultdict(lambda: dict.fromkeys(COUNT_KEYS, 0))
    imps = {}
    pending = {}                 # session -> (click at, system)
    last_at = {}
    clicked_pairs = set()
    votes = {}
    team_clicks = defaultdict(set)

    def resolve(session, rec):
        if session not in pending:
            return
        at, sid = pending.pop(session)
        if rec is None or (rec["type"] == "event" and rec["kind"] == "page_leave"
                           and rec["at"] - at <= dwell_threshold_ms):
            counts[sid]["bounces"] += 1

    for rec in raw_records:
        s = rec["session_id"]
        assert rec["at"] >= last_at.get(s, rec["at"]), "oracle needs per-session time order"
        last_at[s] = rec["at"]
        resolve(s, rec)
        if rec["type"] == "impression":
            imps[rec["impression_id"]] = rec
            for sid in rec["systems"]:
                counts[sid]["impressions"] += 1
            if rec["fallback"]:
                counts[rec["arm"]]["fallbacks"] += 1
            continue
        imp = imps.get(rec["impression_id"])
        if imp is None or rec.get("doc") not in imp["items"]:
            continue
        sid = imp["served_by"][imp["items"].index(rec["doc"])]
        if rec["kind"] == "click":
            counts[sid]["clicked_visits"] += 1
            clicked_pairs.add((imp["impression_id"], sid))
            pending[s] = (rec["at"], sid)
            team_clicks[imp["impression_id"]].add(rec["doc"])
        elif rec["kind"] in ("vote_up", "vote_down"):
            votes[(sid, s, rec["doc"])] = rec["kind"]
    for s in list(pending):
        resolve(s, None)
    for _, sid in clicked_pairs:
        counts[sid]["clicks"] += 1
    for (sid, _, _), kind in votes.items():
        counts[sid]["votes_up" if kind == "vote_up" else "votes_down"] += 1

    for iid, imp in imps.items():
        if imp["task"] != "adhoc" or imp["fallback"] or imp["teams"] is None:
            continue
        base, exp = imp["systems"]
        n_exp = n_base = 0
        for doc in team_clicks.get(iid, ()):
            if imp["teams"][imp["items"].index(doc)] == "experimental":
                n_exp += 1
            else:
                n_base += 1
        if n_exp > n_base:
            counts[exp]["wins"] += 1
            counts[base]["losses"] += 1
        elif n_base > n_exp:
            counts[base]["wins"] += 1
            counts[exp]["losses"] += 1
        else:
            counts[exp]["ties"] += 1
            counts[base]["ties"] += 1
    return {sid: dict(c) for sid, c in counts.items()}


def ratios(c):
    """CTR, bounce rate and preference score from a count dict."""
    decided = c["wins"] + c["losses"]
    return {
        "ctr": c["clicks"] / c["impressions"] if c["impressions"] else None,
        "bounce_rate": c["bounces"] / c["clicked_visits"] if c["clicked_visits"] else None,
        "preference_score": c["wins"] / decided if decided else 0.5,
    }
