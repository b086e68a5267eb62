"""Randomized index-selection rules and K-type quantization."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError


@dataclass
class SelectionRule:
    """For every codebook realization, a distribution over its slots.

    Row ``r`` describes realization ``realizations[r]`` (probability
    ``realization_probs[r]``): slot ``n`` carries symbol index
    ``slots[r, n]`` and is selected with probability ``weights[r, n]``.
    In pair form (``pair_shape = (m, l)``) slot ``n`` is the index pair
    ``divmod(n, l)``.
    """

    realizations: list
    realization_probs: np.ndarray
    slots: np.ndarray
    weights: np.ndarray
    symbols: tuple
    pair_shape: tuple[int, int] | None = None
    flags: list = field(default_factory=list)

    def __post_init__(self):
        if self.slots.shape != self.weights.shape:
            raise ValidationError("slots and weights must have the same shape")
        if self.slots.shape[0] != len(self.realizations):
            raise ValidationError("one row per realization required")
        if np.any(self.weights < 0):
            raise ValidationError("selection weights must be nonnegative")
        if not np.allclose(self.weights.sum(axis=1), 1.0, atol=1e-9):
            raise ValidationError("every row of a selection rule must sum to 1")

    @property
    def n_slots(self) -> int:
        return self.slots.shape[1]

    def output_distribution(self) -> np.ndarray:
        """Law of the selected symbol when the realization is drawn at random."""
        mass = self.realization_probs[:, None] * self.weights
        return np.bincount(self.slots.ravel(), weights=mass.ravel(),
                           minlength=len(self.symbols))

    def slot_label(self, n: int):
        return divmod(n, self.pair_shape[1]) if self.pair_shape else n

    def to_json(self) -> dict:
        rows = {}
        for r, key in enumerate(self.realizations):
            nz = np.flatnonzero(self.weights[r] > 0)
            rows[repr(key)] = [[_plain(self.slot_label(int(n))), float(self.weights[r, n])]
                               for n in nz]
        return {"pair_shape": self.pair_shape, "flags": list(self.flags),
                "symbols": [_plain(s) for s in self.symbols], "rows": rows}


def _plain(x):
    if isinstance(x, tuple):
        return [_plain(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


@dataclass(frozen=True)
class KTypeQuantization:
    """Integer masses summing to ``k`` that approximate a distribution."""

    k: int
    counts: np.ndarray

    @classmethod
    def of(cls, probs, k: int) -> "KTypeQuantization":
        return cls(k, largest_remainder(probs, k))

    def tv_to(self, probs) -> float:
        return 0.5 * float(np.abs(self.counts / self.k - np.asarray(probs)).sum())


def largest_remainder(probs, k: int) -> np.ndarray:
    """Round ``k * probs`` to integers summing to exactly ``k``.

    Leftover units go to the largest fractional parts, earlier indices first
    among ties.
    """
    if k < 1:
        raise ValidationError("k must be positive")
    scaled = np.asarray(probs, dtype=float) * k
    base = np.floor(scaled).astype(np.int64)
    short = int(k - base.sum())
    if short > 0:
        frac = scaled - base
        order = np.lexsort((np.arange(frac.size), -frac))
        # never hand a unit to a null entry
        order = [i for i in order if scaled[i] > 0] or list(order)
        for i in order[:short]:
            base[i] += 1
    elif short < 0:  # float noise pushed a floor over
        order = np.argsort(scaled - base, kind="stable")
        for i in order[:-short]:
            base[i] -= 1
    return base
