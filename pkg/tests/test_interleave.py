import itertools
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from livinglab.errors import ContextMismatch, UnknownClickedDoc
from livinglab.interleave import (
    aggregate_preference,
    coin_stream,
    credit,
    team_draft_interleave,
)
from livinglab.model import Outcome, Ranking, TeamLabel
from oracles import all_rankings, tdi_reference

B, E = TeamLabel.BASELINE, TeamLabel.EXPERIMENTAL


def R(*docs, src="s"):
    return Ranking("q", tuple(docs), src)


def test_identical_inputs_keep_order():
    for coins in itertools.product((True, False), repeat=3):
        imp = team_draft_interleave(R("d1", "d2", "d3"), R("d1", "d2", "d3"), 3, coins)
        assert imp.docs == ("d1", "d2", "d3")
        # round 1 picks d1 (coin winner) and d2 (other team); round 2 picks d3 for the coin winner
        first = B if coins[0] else E
        other = E if coins[0] else B
        assert imp.teams[:2] == (first, other)
        assert imp.teams[2] == (B if coins[1] else E)


def test_hand_traced_round():
    imp = team_draft_interleave(R("x", "y", src="base"), R("y", "x", src="exp"), 2, [True])
    assert imp.items == (("x", B), ("y", E))
    assert imp.coin_trace == (True,)
    assert (imp.source_baseline, imp.source_experimental) == ("base", "exp")


def test_context_mismatch_and_bad_length():
    with pytest.raises(ContextMismatch):
        team_draft_interleave(R("a"), Ranking("other", ("a",), "s"), 3, [True])
    with pytest.raises(ValueError):
        team_draft_interleave(R("a"), R("a"), 0, [True])


def check_invariants(a, b, target, coins, imp):
    docs, teams = imp.docs, imp.teams
    assert len(docs) == len(set(docs))
    assert len(docs) == min(target, len(set(a) | set(b)))
    # prefix property: output set is top-i of a plus top-j of b for some i, j
    assert any(
        set(docs) == set(a[:i]) | set(b[:j])
        for i in range(len(a) + 1) for j in range(len(b) + 1)
    )
    # team-labelled docs come from that team's list in that team's order
    for team, src in ((B, a), (E, b)):
        mine = [d for d, t in zip(docs, teams) if t is team]
        assert [src.index(d) for d in mine] == sorted(src.index(d) for d in mine)
    # every completed round where both teams still had documents is balanced
    nb = teams.count(B)
    ne = teams.count(E)
    if set(a) == set(b):
        assert abs(nb - ne) <= 1
        for k in range(0, len(teams) - 1, 2):
            assert teams[:k + 2].count(B) == teams[:k + 2].count(E)
    # independent re-derivation agrees
    ref_docs, ref_teams, used = tdi_reference(list(a), list(b), list(coins), target)
    assert list(docs) == ref_docs
    assert [t is B for t in teams] == [t == "A" for t in ref_teams]
    assert imp.coin_trace == tuple(coins[:used])


def test_exhaustive_permutations_of_three():
    docs = ("d1", "d2", "d3")
    n = 0
    for a, b in itertools.product(itertools.permutations(docs), repeat=2):
        for coins in itertools.product((True, False), repeat=3):
            for target in (1, 2, 3):
                check_invariants(a, b, target, coins, team_draft_interleave(R(*a), R(*b), target, coins))
                n += 1
    assert n == 6 * 6 * 8 * 3


@given(st.integers(0, 2**32))
def test_random_invariants(seed):
    rng = random.Random(seed)
    universe = [f"d{i}" for i in range(rng.randint(1, 15))]
    a = rng.sample(universe, rng.randint(1, len(universe)))
    b = rng.sample(universe, rng.randint(1, len(universe)))
    target = rng.randint(1, 20)
    coins = [rng.random() < 0.5 for _ in range(40)]
    check_invariants(a, b, target, coins, team_draft_interleave(R(*a), R(*b), target, coins))


def test_determinism_and_coin_stream():
    a, b = R(*"abcdef"), R(*"fedcba")
    x = team_draft_interleave(a, b, 6, impression_id="imp-7")
    y = team_draft_interleave(a, b, 6, impression_id="imp-7")
    assert x == y
    coins = list(itertools.islice(coin_stream("imp-7"), len(x.coin_trace)))
    assert x.coin_trace == tuple(coins)


def test_credit_examples():
    imp = team_draft_interleave(R("a", "b", "c", "d"), R("c", "d", "a", "b"), 4, [True, True])
    # a(B) c(E) b(B) d(E)
    assert imp.items == (("a", B), ("c", E), ("b", B), ("d", E))
    assert credit(imp, {"c", "d"}) is Outcome.WIN_EXPERIMENTAL
    assert credit(imp, set()) is Outcome.TIE
    assert credit(imp, {"a", "b", "c", "d"}) is Outcome.TIE
    assert credit(imp, ["a", "a", "a", "c"]) is Outcome.TIE  # repeated clicks count once
    assert credit(imp, ["a"]) is Outcome.WIN_BASELINE
    with pytest.raises(UnknownClickedDoc):
        credit(imp, ["zz"])


def test_aggregate_preference_examples():
    p = aggregate_preference([Outcome.WIN_EXPERIMENTAL, Outcome.WIN_BASELINE, Outcome.TIE])
    assert (p.wins, p.losses, p.ties, p.preference_score) == (1, 1, 1, 0.5)
    p = aggregate_preference([])
    assert (p.wins, p.losses, p.ties, p.preference_score) == (0, 0, 0, 0.5)


@given(st.lists(st.sampled_from(list(Outcome)), max_size=50))
def test_aggregate_counts(outs):
    p = aggregate_preference(outs)
    assert p.wins + p.losses + p.ties == len(outs)
    assert 0.0 <= p.preference_score <= 1.0


def test_all_short_ranking_pairs_over_shared_universe():
    universe = ("d1", "d2", "d3")
    for a, b in itertools.product(list(all_rankings(universe)), repeat=2):
        for coins in itertools.product((True, False), repeat=3):
            imp = team_draft_interleave(R(*a), R(*b), 3, coins)
            check_invariants(a, b, 3, coins, imp)
