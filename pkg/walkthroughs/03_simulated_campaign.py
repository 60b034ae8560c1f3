"""
A simulated campaign
====================

The simulator builds a synthetic world with hidden relevance grades, starts
three stub systems, registers participants at the central server, and drives
simulated users through the site app. The summary joins the dashboard with
the ground truth, so we can check whether the platform ranks systems the way
their true nDCG@10 does.
"""

# %%
import json

import numpy as np

from livinglab.server import format_report_text
from livinglab.sim import ClickModel, generate_world, run_campaign

world = generate_world(40, 20, seed=42)
grades = np.array(list(world.grades.values()))
print("grade histogram:", np.bincount(grades, minlength=3) / grades.size)

# %%
# Cascade users: scan from the top, click with a grade-dependent probability,
# keep scanning after a click half of the time.
model = ClickModel()
rng = np.random.default_rng(0)
print([model.sample([0.05, 0.9, 0.5, 0.05, 0.9], rng) for _ in range(5)])

# %%
summary = run_campaign({"seed": 42, "sessions": 2000, "mode": "inproc"})
print(json.dumps(summary["ground_truth_ndcg10"], indent=2, sort_keys=True))
print(json.dumps(summary["verdicts"], indent=2))
print("agreement:", summary["agreement"])

# %%
# The text view of the dashboard.
print(format_report_text(summary["report"]))
