"""Click models for simulated users.

* ``position_based``: position r is clicked with probability
  examination(r) * attractiveness, independently per position.
* ``cascade``: scan top-down; click with the attractiveness probability; after
  a click, keep scanning with probability ``continuation``.
* ``random_uniform``: every position is clicked with ``click_prob``.

Attractiveness comes from the hidden relevance grade via ``grade_probs``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import InvalidValue

KINDS = ("position_based", "cascade", "random_uniform")


def reciprocal_rank(rank: int) -> float:
    return 1.0 / rank


@dataclass(frozen=True)
class ClickModel:
    kind: str = "cascade"
    grade_probs: tuple[float, ...] = (0.05, 0.5, 0.9)
    continuation: float = 0.5
    examination: Callable[[int], float] = reciprocal_rank
    click_prob: float = 0.1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidValue(f"unknown click model {self.kind!r}")
        probs = [*self.grade_probs, self.continuation, self.click_prob]
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise InvalidValue("click model probabilities must lie in [0, 1]")

    @classmethod
    def position_only(cls, attractiveness: float = 0.5, examination=reciprocal_rank) -> "ClickModel":
        """Clicks depend on the rank alone, never on the document."""
        return cls("position_based", (attractiveness,) * 3, examination=examination)

    def attractiveness(self, grade: int) -> float:
        return self.grade_probs[grade]

    def sample(self, attractiveness: Sequence[float], rng: np.random.Generator) -> list[int]:
        """Return clicked 0-based positions in scan order."""
        n = len(attractiveness)
        if self.kind == "random_uniform":
            return [i for i, u in enumerate(rng.random(n)) if u < self.click_prob]
        if self.kind == "position_based":
            u = rng.random(n)
            return [
                i for i in range(n)
                if u[i] < self.examination(i + 1) * attractiveness[i]
            ]
        clicks = []
        for i in range(n):
            if rng.random() < attractiveness[i]:
                clicks.append(i)
                if rng.random() >= self.continuation:
                    break
        return clicks

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "grade_probs": list(self.grade_probs),
            "continuation": self.continuation,
            "click_prob": self.click_prob,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClickModel":
        return cls(
            d.get("kind", "cascade"),
            tuple(d.get("grade_probs", (0.05, 0.5, 0.9))),
            d.get("continuation", 0.5),
            click_prob=d.get("click_prob", 0.1),
        )
