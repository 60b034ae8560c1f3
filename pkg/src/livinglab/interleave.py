"""Team-draft interleaving and click credit.

Each draft round flips a coin to decide which team picks first; then each team
appends its highest-ranked document that is not yet in the output. Drafting
stops once the target length is reached or both rankings are used up.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Iterator

from .errors import ContextMismatch, UnknownClickedDoc
from .model import DocId, Outcome, Ranking, SystemId, TeamLabel

DEFAULT_TARGET_LENGTH = 10


@dataclass(frozen=True)
class InterleavedImpression:
    impression_id: str
    context: str
    items: tuple[tuple[DocId, TeamLabel], ...]
    coin_trace: tuple[bool, ...]
    source_baseline: SystemId
    source_experimental: SystemId
    target_length: int

    @property
    def docs(self) -> tuple[DocId, ...]:
        return tuple(doc for doc, _ in self.items)

    @property
    def teams(self) -> tuple[TeamLabel, ...]:
        return tuple(team for _, team in self.items)


def coin_stream(impression_id: str) -> Iterator[bool]:
    """Replayable coin flips; True means the baseline team picks first."""
    rng = random.Random(f"tdi:{impression_id}")
    while True:
        yield rng.random() < 0.5


def team_draft_interleave(
    baseline: Ranking,
    experimental: Ranking,
    target_length: int = DEFAULT_TARGET_LENGTH,
    coins: Iterable[bool] | None = None,
    impression_id: str = "",
) -> InterleavedImpression:
    if baseline.context != experimental.context:
        raise ContextMismatch(baseline.context, experimental.context)
    if target_length < 1:
        raise ValueError("target_length must be >= 1")
    coins = iter(coins if coins is not None else coin_stream(impression_id))

    lists = {TeamLabel.BASELINE: baseline.items, TeamLabel.EXPERIMENTAL: experimental.items}
    cursor = {TeamLabel.BASELINE: 0, TeamLabel.EXPERIMENTAL: 0}
    picked: set[DocId] = set()
    items: list[tuple[DocId, TeamLabel]] = []
    trace: list[bool] = []

    def next_doc(team: TeamLabel) -> DocId | None:
        docs, i = lists[team], cursor[team]
        while i < len(docs) and docs[i] in picked:
            i += 1
        cursor[team] = i
        return docs[i] if i < len(docs) else None

    while len(items) < target_length:
        if next_doc(TeamLabel.BASELINE) is None and next_doc(TeamLabel.EXPERIMENTAL) is None:
            break
        baseline_first = next(coins)
        trace.append(baseline_first)
        order = (
            (TeamLabel.BASELINE, TeamLabel.EXPERIMENTAL)
            if baseline_first
            else (TeamLabel.EXPERIMENTAL, TeamLabel.BASELINE)
        )
        for team in order:
            if len(items) >= target_length:
                break
            doc = next_doc(team)
            if doc is not None:
                items.append((doc, team))
                picked.add(doc)

    return InterleavedImpression(
        impression_id=impression_id,
        context=baseline.context,
        items=tuple(items),
        coin_trace=tuple(trace),
        source_baseline=baseline.source,
        source_experimental=experimental.source,
        target_length=target_length,
    )


def credit_teams(
    docs: tuple[DocId, ...], teams: tuple[TeamLabel, ...], clicks: Iterable[DocId]
) -> Outcome:
    """Credit clicks to teams; repeated clicks on one document count once."""
    team_of = dict(zip(docs, teams))
    per_team = {TeamLabel.BASELINE: 0, TeamLabel.EXPERIMENTAL: 0}
    for doc in set(clicks):
        if doc not in team_of:
            raise UnknownClickedDoc(doc)
        per_team[team_of[doc]] += 1
    if per_team[TeamLabel.EXPERIMENTAL] > per_team[TeamLabel.BASELINE]:
        return Outcome.WIN_EXPERIMENTAL
    if per_team[TeamLabel.BASELINE] > per_team[TeamLabel.EXPERIMENTAL]:
        return Outcome.WIN_BASELINE
    return Outcome.TIE


def credit(impression: InterleavedImpression, clicks: Iterable[DocId]) -> Outcome:
    return credit_teams(impression.docs, impression.teams, clicks)


@dataclass(frozen=True)
class Preference:
    wins: int
    losses: int
    ties: int

    @property
    def preference_score(self) -> float:
        decided = self.wins + self.losses
        return self.wins / decided if decided else 0.5


def aggregate_preference(outcomes: Iterable[Outcome]) -> Preference:
    """Tally outcomes from the experimental team's point of view."""
    wins = losses = ties = 0
    for o in outcomes:
        if o is Outcome.WIN_EXPERIMENTAL:
            wins += 1
        elif o is Outcome.WIN_BASELINE:
            losses += 1
        else:
            ties += 1
    return Preference(wins, losses, ties)
