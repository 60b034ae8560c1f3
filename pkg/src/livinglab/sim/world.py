"""Synthetic lab data: queries, seed documents, candidate lists and hidden grades."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidValue
from ..runs import CandidateList

DEFAULT_GRADE_DISTRIBUTION = (0.6, 0.3, 0.1)

_VOCAB = (
    "cancer therapy gene expression protein diabetes nutrition soil climate "
    "survey election religion migration income education health labour youth "
    "attitudes panel cohort microbiome vaccine trial infection obesity welfare"
).split()


@dataclass(frozen=True)
class SyntheticWorld:
    seed: int
    queries: dict[str, str]
    seeds: tuple[str, ...]
    candidates: dict[str, CandidateList]
    grades: dict[tuple[str, str], int]

    def grade(self, context: str, doc: str) -> int:
        return self.grades.get((context, doc), 0)

    def contexts(self) -> list[str]:
        return list(self.candidates)

    def validate(self) -> "SyntheticWorld":
        for (context, doc), g in self.grades.items():
            if context not in self.candidates or doc not in self.candidates[context]:
                raise InvalidValue(f"graded document {doc!r} is not a candidate of {context!r}")
            if g not in (0, 1, 2):
                raise InvalidValue(f"grade must be 0, 1 or 2, got {g}")
        return self


def generate_world(
    n_queries: int,
    n_docs_per_query: int,
    seed: int,
    n_seeds: int | None = None,
    grade_distribution=DEFAULT_GRADE_DISTRIBUTION,
) -> SyntheticWorld:
    """Build a deterministic world from ``seed``.

    Ad-hoc contexts are ``q0001``...; recommendation seed documents are
    ``p0001``... (``n_seeds`` defaults to ``n_queries``). Every context gets
    ``n_docs_per_query`` candidates with grades drawn from
    ``grade_distribution`` over {0, 1, 2}.
    """
    if n_queries < 1 or n_docs_per_query < 1:
        raise ValueError("sizes must be >= 1")
    n_seeds = n_queries if n_seeds is None else n_seeds
    p = np.asarray(grade_distribution, dtype=float)
    if p.shape != (3,) or (p < 0).any() or not np.isclose(p.sum(), 1.0):
        raise ValueError("grade_distribution must be three probabilities summing to 1")
    rng = np.random.default_rng(seed)

    queries = {}
    for i in range(1, n_queries + 1):
        words = rng.choice(len(_VOCAB), size=int(rng.integers(1, 4)), replace=False)
        queries[f"q{i:04d}"] = " ".join(_VOCAB[w] for w in words)
    seeds = tuple(f"p{i:04d}" for i in range(1, n_seeds + 1))

    candidates: dict[str, CandidateList] = {}
    grades: dict[tuple[str, str], int] = {}
    for context in list(queries) + list(seeds):
        prefix = "doc" if context.startswith("q") else "ds"
        docs = tuple(f"{prefix}-{context}-{j:03d}" for j in range(n_docs_per_query))
        candidates[context] = CandidateList(context, docs)
        for doc, g in zip(docs, rng.choice(3, size=n_docs_per_query, p=p)):
            grades[(context, doc)] = int(g)
    return SyntheticWorld(seed, queries, seeds, candidates, grades)
