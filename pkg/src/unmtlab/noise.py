"""Word-shuffle corruption: floor(l/2) random adjacent swaps.

A SwapPlan for a length-l sentence is floor(l/2) indices drawn uniformly and
independently (with replacement) from [0, l-2]; index i swaps positions i and
i+1, applied in plan order. End-of-sentence markers never take part: plans are
made for, and applied to, content tokens only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Sentence

__all__ = ["NoiseError", "SwapPlan", "make_swap_plan", "shuffle"]


class NoiseError(ValueError):
    """Invalid swap plan or plan/sentence mismatch."""


@dataclass(frozen=True, slots=True)
class SwapPlan:
    """Ordered adjacent-swap indices for a sentence of a fixed length."""

    length: int
    swaps: tuple[int, ...]

    def __post_init__(self):
        if self.length < 1:
            raise NoiseError(f"plan for impossible length {self.length}")
        if len(self.swaps) != self.length // 2:
            raise NoiseError(
                f"plan has {len(self.swaps)} swaps, expected {self.length // 2} "
                f"for length {self.length}"
            )
        for i in self.swaps:
            if not 0 <= i <= self.length - 2:
                raise NoiseError(f"swap index {i} out of range for length {self.length}")


def make_swap_plan(length: int, rng: np.random.Generator) -> SwapPlan:
    """Draw floor(length/2) swap indices uniformly from [0, length-2]."""
    if length < 1:
        raise NoiseError("sentence length must be >= 1")
    k = length // 2
    if k == 0:
        return SwapPlan(length, ())
    idx = rng.integers(0, length - 1, size=k)  # high is exclusive
    return SwapPlan(length, tuple(int(i) for i in idx))


def shuffle(sentence: Sentence, plan: SwapPlan) -> Sentence:
    """Apply the plan's swaps in order; token multiset and length preserved."""
    if plan.length != len(sentence):
        raise NoiseError(
            f"plan for length {plan.length} applied to length {len(sentence)}"
        )
    ids = list(sentence.ids)
    for i in plan.swaps:
        ids[i], ids[i + 1] = ids[i + 1], ids[i]
    return Sentence(sentence.lang, tuple(ids))
