"""Monitor, analyze, plan and execute over a pluggable managed system.

A managed system adapter provides

* ``advance() -> dict``: run one cycle of the real system and return its
  realized metrics,
* ``probe() -> Configuration``,
* ``options(conf) -> list`` of candidate settings in a fixed order,
* ``context(conf)``: the object quality models are built from,
* ``diff(current, target) -> tuple[PlanStep]`` and ``failsafe_steps()``,
* ``apply(current, plan)``: the effector. It raises on invalid steps.

The loop runs one cycle of the system, then M, A, P and E. Settings chosen
after cycle ``k`` take effect in cycle ``k + 1``.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from ..engine import EngineError
from ..qmodels import Registry, SMCSettings
from ..rng import derive_seed
from ..smc import SMCError
from .knowledge import AdaptationOption, Configuration, Plan, PlanStep, check_goals

# Default run budget per analysis: comfortably above 216 options x (738 + 1000).
DEFAULT_BUDGET = 1_000_000


@dataclass
class Knowledge:
    goals: tuple
    registry: Registry
    smc: SMCSettings = field(default_factory=SMCSettings)
    budget: int = DEFAULT_BUDGET  # runs per analysis
    current: Optional[Configuration] = None
    previous: Optional[Configuration] = None
    options: list = field(default_factory=list)
    plan: Plan = field(default_factory=Plan)
    partial: bool = False
    runs_used: int = 0

    def __post_init__(self):
        self.goals = check_goals(self.goals)
        if self.budget <= 0:
            raise ValueError("verification budget must be positive")
        missing = [g.quality for g in self.goals if g.quality not in self.registry]
        if missing:
            raise ValueError(f"goals refer to qualities without a model: {missing}")


def quality_code(name: str) -> int:
    """Stable per-quality seed component (independent of registration order)."""
    return zlib.crc32(name.encode())


def monitor(knowledge: Knowledge, probe: Configuration) -> bool:
    """Store the probe; analysis is required iff anything changed."""
    if not isinstance(probe, Configuration):
        raise TypeError("probe data must be a Configuration")
    knowledge.previous = knowledge.current
    knowledge.current = probe
    return not probe.same_as(knowledge.previous)


def analyze(knowledge: Knowledge, candidates: Sequence, context, seed: int, stop: Optional[Callable[[], bool]] = None):
    """Estimate every registered quality of every candidate, within the run budget.

    Run ``i`` of quality ``q`` for option ``j`` uses seed
    ``derive_seed(seed, j, code(q))``, so the same inputs give the same
    estimates whatever the cycle. When the budget or ``stop`` ends the
    analysis early, the results so far are kept and ``knowledge.partial`` set.
    """
    options = [AdaptationOption(i, s) for i, s in enumerate(candidates)]
    knowledge.options = options
    knowledge.partial = False
    used = 0
    for opt in options:
        for model in knowledge.registry:
            left = knowledge.budget - used
            if left <= 0 or (stop is not None and stop()):
                knowledge.partial = True
                break
            est = model.estimate(
                context, opt.settings, knowledge.smc, derive_seed(seed, opt.index, quality_code(model.name)),
                limit=left, stop=stop,
            )
            used += est.runs
            opt.results[model.name] = est
            if est.partial:
                knowledge.partial = True
                break
        if knowledge.partial:
            break
    knowledge.runs_used = used
    return options


def select(goals, options) -> list:
    """Apply goals in rank order; returns the surviving options (winner first).

    Satisfaction goals keep options whose interval bound meets the threshold.
    Optimization goals keep the options with the best point estimate. Options
    lacking a complete estimate for a goal's quality are dropped.
    """
    alive = list(options)
    for g in goals:
        alive = [o for o in alive if g.quality in o.results and not o.results[g.quality].partial]
        if g.kind == "satisfaction":
            alive = [o for o in alive if g.satisfied_by(o.results[g.quality])]
        elif alive:
            pts = [o.results[g.quality].point for o in alive]
            best = min(pts) if g.direction == "min" else max(pts)
            alive = [o for o, p in zip(alive, pts) if p == best]
    return sorted(alive, key=lambda o: o.index)


def plan(knowledge: Knowledge, system) -> tuple[Plan, Optional[AdaptationOption]]:
    verified = [o for o in knowledge.options if o.verified(knowledge.registry.names())]
    if not knowledge.options or not any(o.results for o in knowledge.options):
        p = Plan(tuple(system.failsafe_steps()), True, "no verified options")
        knowledge.plan = p
        return p, None
    survivors = select(knowledge.goals, knowledge.options)
    if not survivors:
        why = "no option satisfies the goals" if verified else "no option fully verified"
        p = Plan(tuple(system.failsafe_steps()), True, why)
        knowledge.plan = p
        return p, None
    winner = survivors[0]
    p = Plan(tuple(system.diff(knowledge.current.settings, winner.settings)))
    knowledge.plan = p
    return p, winner


def execute(knowledge: Knowledge, plan_: Plan, system) -> Plan:
    """Apply the plan; an effector rejection falls back to the failsafe plan."""
    if not plan_.steps:
        return plan_
    try:
        system.apply(knowledge.current.settings, plan_)
        return plan_
    except (ValueError, KeyError, IndexError) as exc:
        fs = Plan(tuple(system.failsafe_steps()), True, f"effector rejected plan: {exc}")
        system.apply(knowledge.current.settings, fs)
        knowledge.plan = fs
        return fs


# -- decision log -------------------------------------------------------------

LOG_SCHEMA = "decision-log/1"
LOG_HEADER = (
    "cycle",
    "optionsTotal",
    "optionsVerified",
    "chosenOptionIndex",
    "packetLossEst",
    "energyEst",
    "latencyEst",
    "planSteps",
    "failsafe",
    "partial",
    "analysisRuns",
    "event",
    "packetLoss",
    "energy",
    "latency",
)


@dataclass
class Decision:
    cycle: int
    analyzed: bool
    options_total: int = 0
    options_verified: int = 0
    chosen: Optional[int] = None
    estimates: dict = field(default_factory=dict)  # quality -> Estimate of the chosen option
    plan_steps: int = 0
    failsafe: bool = False
    partial: bool = False
    runs: int = 0
    runs_by_quality: dict = field(default_factory=dict)
    event: str = ""
    realized: dict = field(default_factory=dict)
    diagnostic: str = ""

    def row(self) -> tuple:
        def est(q):
            e = self.estimates.get(q)
            return "" if e is None or math.isnan(e.point) else f"{e.point:.6f}"

        def real(q):
            v = self.realized.get(q)
            return "" if v is None else f"{v:.6f}"

        return (
            self.cycle,
            self.options_total,
            self.options_verified,
            "" if self.chosen is None else self.chosen,
            est("packetLoss"),
            est("energy"),
            est("latency"),
            self.plan_steps,
            int(self.failsafe),
            int(self.partial),
            self.runs,
            self.event,
            real("packetLoss"),
            real("energy"),
            real("latency"),
        )


def write_log(decisions, path_or_file) -> None:
    import csv

    def dump(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_HEADER)
        for d in decisions:
            w.writerow(d.row())

    if hasattr(path_or_file, "write"):
        dump(path_or_file)
    else:
        with open(path_or_file, "w", encoding="utf-8", newline="") as fh:
            dump(fh)


# -- the loop -----------------------------------------------------------------

class FeedbackLoop:
    """Sequential MAPE loop over one managed system.

    ``quiescent`` hooks run at the boundary after Execute and before the next
    Monitor; each may mutate the knowledge and returns an event label or None.
    """

    def __init__(self, knowledge: Knowledge, system, seed: int = 0, budget_stop=None):
        self.knowledge = knowledge
        self.system = system
        self.seed = seed
        self.budget_stop = budget_stop
        self.quiescent: list[Callable] = []
        self.log: list[Decision] = []
        self.cycle = 0
        self.busy = False  # True while a cycle is between Monitor and Execute
        self._pending_event = ""

    def add_event(self, label: str) -> None:
        """Attach an event label to the next decision row."""
        self._pending_event = ";".join(e for e in (self._pending_event, label) if e)

    def step(self) -> Decision:
        k = self.knowledge
        self.busy = True
        realized = self.system.advance()
        conf = self.system.probe()
        d = Decision(self.cycle, False, event=self._pending_event, realized=dict(realized))
        self._pending_event = ""
        if monitor(k, conf):
            d.analyzed = True
            try:
                candidates = self.system.options(conf)
                analyze(k, candidates, self.system.context(conf), self.seed, self.budget_stop)
                p, winner = plan(k, self.system)
            except (EngineError, SMCError, ValueError, ArithmeticError) as exc:
                k.options = []
                p, winner = Plan(tuple(self.system.failsafe_steps()), True, f"analysis failed: {exc}"), None
                k.plan = p
            p = execute(k, p, self.system)
            d.options_total = len(k.options)
            d.options_verified = sum(o.verified(k.registry.names()) for o in k.options)
            d.partial = k.partial
            d.runs = k.runs_used
            for o in k.options:
                for q, e in o.results.items():
                    d.runs_by_quality[q] = d.runs_by_quality.get(q, 0) + e.runs
            d.failsafe = p.failsafe
            d.diagnostic = p.diagnostic
            d.plan_steps = len(p.steps)
            if winner is not None and not p.failsafe:
                d.chosen = winner.index
                d.estimates = dict(winner.results)
        self.log.append(d)
        self.cycle += 1
        self.busy = False
        events = [e for e in (hook(k, self.cycle) for hook in self.quiescent) if e]
        self._pending_event = ";".join(events)
        return d

    def run(self, cycles: int) -> list[Decision]:
        if cycles < 0:
            raise ValueError("cycles must be >= 0")
        for _ in range(cycles):
            self.step()
        return self.log


def run_loop(knowledge: Knowledge, system, cycles: int, seed: int = 0) -> list[Decision]:
    return FeedbackLoop(knowledge, system, seed).run(cycles)
