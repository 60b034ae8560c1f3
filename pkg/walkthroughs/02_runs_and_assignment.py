"""
Run files, candidate lists and session assignment
=================================================

Precomputed submissions arrive as six-column run files. They are parsed,
normalized and checked against the candidate lists the site can show.
Recommendation traffic is split by session instead of interleaved.
"""

# %%
from collections import Counter

import numpy as np

from livinglab.assignment import ExperimentConfig, assign_session, clamp_k
from livinglab.errors import RunFormatError
from livinglab.model import Task
from livinglab.runs import parse_candidates, parse_run_file, validate_against_candidates

run_text = """\
q1 Q0 d7 2 12.5 teamX
q1 Q0 d42 1 17.89 teamX
q1 Q0 d3 3 12.5 teamX
q2 Q0 d1 1 3.0 teamX
q2 Q0 zz 2 1.0 teamX
"""
rs = parse_run_file(run_text)
print(rs.serialize())

# %%
# Normalization orders by score, then by the submitted rank, then by line
# order. Serializing and parsing again is a fixed point.
print(parse_run_file(rs.serialize()) == rs)

# %%
candidates = parse_candidates("q1\td42 d7 d3 d11\nq2\td1 d9 d4\nq3\td5 d6\n")
report = validate_against_candidates(rs, candidates)
print(report.to_text())

# %%
# Malformed lines are rejected with the line number.
try:
    parse_run_file("q1 Q0 d1 1 1.0 teamX\nq1 QX d2 2 0.5 teamX\n")
except RunFormatError as exc:
    print(type(exc).__name__, exc)

# %%
# Sessions are hashed onto arms. The same session always lands on the same
# arm; distinct sessions spread evenly.
cfg = ExperimentConfig("rec-ab", Task.RECOMMENDATION, ("rec-a", "rec-b", "rec-c", "rec-d"), "2021").validate()
counts = Counter(assign_session(f"sess-{i}", cfg) for i in range(10_000))
print(counts)
print("max deviation from 2500:", max(abs(np.array(list(counts.values())) - 2500)))

# %%
# Panel size: requests are clamped into [k_min, k_max]; too few candidates
# means no panel at all.
for requested, available in [(15, 50), (1, 50), (5, 2), (8, 6)]:
    print(requested, available, "->", clamp_k(requested, available, cfg))
