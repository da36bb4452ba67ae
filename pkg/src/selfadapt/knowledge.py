"""Knowledge types shared by the feedback loop and the managed systems."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

COMPARATORS = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


@dataclass(frozen=True)
class Configuration:
    """Snapshot of a managed system: settings, observed qualities, environment.

    ``settings`` is the system-specific settings object (hashable), qualities
    maps quality name to the last observed value and ``environment`` maps
    uncertainty name to a tuple of values.
    """

    settings: Any
    qualities: Mapping[str, float] = field(default_factory=dict)
    environment: Mapping[str, tuple] = field(default_factory=dict)

    def __post_init__(self):
        for k, v in self.qualities.items():
            if not math.isfinite(v):
                raise ValueError(f"quality {k} is not finite: {v}")
        object.__setattr__(self, "qualities", dict(self.qualities))
        object.__setattr__(self, "environment", {k: tuple(v) for k, v in self.environment.items()})

    def same_as(self, other: Optional["Configuration"]) -> bool:
        return (
            other is not None
            and self.settings == other.settings
            and self.qualities == other.qualities
            and self.environment == other.environment
        )


@dataclass
class AdaptationOption:
    index: int
    settings: Any
    results: dict = field(default_factory=dict)  # quality -> smc Estimate

    def verified(self, qualities) -> bool:
        return all(q in self.results and not self.results[q].partial for q in qualities)


@dataclass(frozen=True)
class Goal:
    """Satisfaction goal (``comparator`` + ``threshold``) or optimization goal (``direction``)."""

    quality: str
    rank: int
    comparator: Optional[str] = None
    threshold: Optional[float] = None
    direction: Optional[str] = None  # 'min' | 'max'

    def __post_init__(self):
        if self.kind == "satisfaction":
            if self.comparator not in COMPARATORS:
                raise ValueError(f"unknown comparator {self.comparator!r}")
            if self.threshold is None or not math.isfinite(self.threshold):
                raise ValueError(f"goal on {self.quality}: threshold must be finite, got {self.threshold!r}")
        elif self.direction not in ("min", "max"):
            raise ValueError("a goal needs either comparator+threshold or direction min/max")

    @property
    def kind(self) -> str:
        return "satisfaction" if self.comparator is not None else "optimization"

    def satisfied_by(self, estimate) -> bool:
        """Conservative test on the interval bound facing the threshold."""
        if self.comparator in ("<", "<="):
            value = estimate.hi
        else:
            value = estimate.lo
        return COMPARATORS[self.comparator](value, self.threshold)

    def holds_for(self, value: float) -> bool:
        return COMPARATORS[self.comparator](value, self.threshold)

    def better(self, a: Configuration, b: Configuration) -> bool:
        """Pairwise comparator for optimization goals: is ``a`` strictly better than ``b``?"""
        x, y = a.qualities[self.quality], b.qualities[self.quality]
        return x < y if self.direction == "min" else x > y

    def to_dict(self) -> dict:
        d = {"quality": self.quality, "rank": self.rank}
        if self.kind == "satisfaction":
            d.update(comparator=self.comparator, threshold=self.threshold)
        else:
            d["direction"] = self.direction
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Goal":
        unknown = set(d) - {"quality", "rank", "comparator", "threshold", "direction"}
        if unknown:
            raise ValueError(f"unknown goal fields {sorted(unknown)}")
        th = d.get("threshold")
        return cls(
            quality=str(d["quality"]),
            rank=int(d["rank"]),
            comparator=d.get("comparator"),
            threshold=None if th is None else float(th),
            direction=d.get("direction"),
        )


def check_goals(goals) -> tuple:
    goals = tuple(sorted(goals, key=lambda g: g.rank))
    if not goals:
        raise ValueError("at least one goal is required")
    ranks = [g.rank for g in goals]
    if len(set(ranks)) != len(ranks):
        raise ValueError("goal ranks must be unique")
    return goals


@dataclass(frozen=True)
class PlanStep:
    kind: str  # 'setPower' | 'setDistribution' | 'failsafe' | 'setProvider'
    element: Any
    value: Any


@dataclass(frozen=True)
class Plan:
    steps: tuple = ()
    failsafe: bool = False
    diagnostic: str = ""

    def __len__(self) -> int:
        return len(self.steps)
