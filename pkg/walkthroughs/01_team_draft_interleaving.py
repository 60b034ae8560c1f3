"""
Team-draft interleaving, step by step
=====================================

Two rankers answer the same query. Interleaving merges their lists into one
result page, remembers which team contributed each document, and turns the
user's clicks into a win, a loss or a tie.
"""

# %%
from livinglab.interleave import aggregate_preference, coin_stream, credit, team_draft_interleave
from livinglab.model import Ranking

baseline = Ranking("q1", ("d1", "d2", "d3", "d4"), "production")
experimental = Ranking("q1", ("d3", "d1", "d5", "d2"), "participant")

# %%
# Each round flips a coin: True lets the baseline pick first. The coins come
# from a generator seeded by the impression id, so an impression can always
# be rebuilt from its id.
imp = team_draft_interleave(baseline, experimental, 4, impression_id="imp-0001")
for doc, team in imp.items:
    print(f"{doc:>3}  {team.value}")
print("coins used:", imp.coin_trace)

# %%
# The same id gives the same coins, hence the same page.
again = team_draft_interleave(baseline, experimental, 4, coin_stream("imp-0001"), impression_id="imp-0001")
print("replayable:", again == imp)

# %%
# Clicks are credited to the team that placed the document. Clicking the same
# document twice counts once.
for clicks in ([], ["d3"], ["d3", "d3", "d1"]):
    print(clicks, "->", credit(imp, clicks).value)

# %%
# Over many impressions the outcomes collapse into one preference score for
# the experimental system: wins / (wins + losses), ties ignored.
outcomes = [credit(imp, c) for c in (["d3"], ["d3"], ["d1"], [], ["d5"])]
pref = aggregate_preference(outcomes)
print(pref, "->", pref.preference_score)
