from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch, ValidationError
from ..probcore import JointPmf


@dataclass(frozen=True)
class CoveringSet:
    """Boolean mask over U x V, optionally tagged with how it was built."""

    mask: np.ndarray
    provenance: str = "explicit"

    @classmethod
    def from_mask(cls, mask, j: JointPmf | None = None, provenance: str = "explicit"):
        arr = np.array(mask, dtype=bool)
        if j is not None and arr.shape != j.shape:
            raise ShapeMismatch(f"mask shape {arr.shape} does not match joint {j.shape}")
        arr.setflags(write=False)
        return cls(arr, provenance)

    @classmethod
    def full(cls, j: JointPmf) -> "CoveringSet":
        return cls.from_mask(np.ones(j.shape, dtype=bool), provenance="full")

    @classmethod
    def empty(cls, j: JointPmf) -> "CoveringSet":
        return cls.from_mask(np.zeros(j.shape, dtype=bool), provenance="empty")

    @classmethod
    def density_threshold(cls, j: JointPmf, tau: float) -> "CoveringSet":
        """Atoms with information density strictly above ``tau``."""
        return cls.from_mask((j.matrix > 0) & (j.density > tau),
                             provenance=f"density-threshold({tau:.12g})")

    def check(self, j: JointPmf) -> None:
        if self.mask.shape != j.shape:
            raise ShapeMismatch(f"covering set {self.mask.shape} vs joint {j.shape}")

    def mass(self, j: JointPmf) -> float:
        self.check(j)
        return float(j.matrix[self.mask].sum())

    def to_json(self) -> dict:
        return {"mask": self.mask.astype(int).tolist(), "provenance": self.provenance}


@dataclass(frozen=True)
class RatePair:
    r1: float
    r2: float

    def __post_init__(self):
        for r in (self.r1, self.r2):
            if not (math.isfinite(r) and r >= 0):
                raise ValidationError(f"rates must be finite and nonnegative, got {r}")

    @property
    def total(self) -> float:
        return self.r1 + self.r2


@dataclass
class BoundReport:
    name: str
    value: float
    params: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    kind: str = "probability"
    # natural log of the unclamped value when it under/overflows a double
    log_value: float | None = None

    def to_json(self) -> dict:
        out = {"name": self.name, "value": _jsonable(self.value),
               "params": {k: _jsonable(v) for k, v in self.params.items()},
               "notes": list(self.notes)}
        if self.log_value is not None:
            out["log_value"] = _jsonable(self.log_value)
        return out


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return v


def probability_report(name: str, raw: float, params: dict, notes=None,
                       log_value: float | None = None) -> BoundReport:
    notes = list(notes or [])
    value = raw
    if math.isnan(raw):
        value = 1.0
        notes.append("undefined value replaced by the trivial bound 1")
    elif raw > 1.0:
        value = 1.0
        notes.append(f"clamped from {raw:.12g}")
    elif raw < 0.0:
        value = 0.0
        notes.append(f"clamped from {raw:.12g}")
    return BoundReport(name, float(value), params, notes, "probability", log_value)
