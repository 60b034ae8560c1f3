"""Simulated users, synthetic lab data and reference systems."""

from .clickmodel import ClickModel, reciprocal_rank
from .harness import (
    Behaviour,
    Campaign,
    CampaignConfig,
    HttpAppClient,
    InProcessAppClient,
    InterleavingTrial,
    run_campaign,
    simulate_interleaving,
    simulate_session,
)
from .systems import (
    FaultInjector,
    LocalTransport,
    StubSystem,
    candidate_order,
    make_run,
    noisy_ranker,
    relevance_ranker,
    shuffled_ranker,
)
from .world import SyntheticWorld, generate_world

__all__ = [
    "Behaviour",
    "Campaign",
    "CampaignConfig",
    "ClickModel",
    "FaultInjector",
    "HttpAppClient",
    "InProcessAppClient",
    "InterleavingTrial",
    "LocalTransport",
    "StubSystem",
    "SyntheticWorld",
    "candidate_order",
    "generate_world",
    "make_run",
    "noisy_ranker",
    "reciprocal_rank",
    "relevance_ranker",
    "run_campaign",
    "shuffled_ranker",
    "simulate_interleaving",
    "simulate_session",
]
