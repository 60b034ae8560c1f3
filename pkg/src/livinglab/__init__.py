"""livinglab: online evaluation of academic search systems.

Experimental rankers are interleaved with a production baseline for ad-hoc
search, experimental recommenders are split by session for dataset
recommendation, and both are scored from user feedback.
"""

from .assignment import ExperimentConfig, assign_session, clamp_k, fnv1a_64
from .interleave import (
    InterleavedImpression,
    Preference,
    aggregate_preference,
    credit,
    team_draft_interleave,
)
from .metrics import SystemScorecard, build_scorecards, compute_bounce_rate, compute_ctr, tally_votes
from .model import (
    EventKind,
    FeedbackEvent,
    ImpressionRecord,
    Outcome,
    Ranking,
    SystemKind,
    SystemRecord,
    Task,
    TeamLabel,
    validate_ranking,
)
from .runs import (
    CandidateList,
    RunSet,
    load_candidates,
    load_queries,
    parse_run_file,
    parse_run_line,
    validate_against_candidates,
)

__version__ = "0.1.0"
