"""Replay of a stub scenario through the native feedback loop.

Gives the per-sample decision codes the loop model records in ``outcome``,
so both can be compared on every combination of verifier time-outs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from ..knowledge import Configuration, Goal, PlanStep
from ..mape.loop import FeedbackLoop, Knowledge
from ..qmodels import MEAN, PROBABILITY, Registry
from ..smc import Estimate
from .scenario import FAILSAFE, NOCHANGE, SKIPPED, UNSET, StubScenario

_PARTIAL = Estimate(math.nan, -math.inf, math.inf, 0, partial=True, met=False)


@dataclass(frozen=True)
class _StubModel:
    """Quality model returning scripted estimates; context is (outputs, timed_out)."""

    name: str
    kind: str

    def estimate(self, context, settings, smc, seed, limit=None, stop=None):
        out, timed_out = context
        if timed_out and settings >= out.timeout_after:
            return _PARTIAL
        if self.name == "packetLoss":
            hi = out.loss_hi[settings] / 10000
            return Estimate(hi, hi, hi, 1)
        e = out.energy[settings] / 1000
        return Estimate(e, e, e, 1)


class StubSystem:
    def __init__(self, sc: StubScenario, timeouts):
        self.sc = sc
        self.timeouts = list(timeouts)
        self.i = -1
        self.current = UNSET if sc.initial is None else sc.initial

    def advance(self) -> dict:
        self.i += 1
        return {}

    def probe(self) -> Configuration:
        s = self.sc.samples[self.i]
        return Configuration(self.current, {"packetLoss": s.packet_loss / 10000}, {"env": (s.env,)})

    def _out(self):
        return self.sc.verifier[self.sc.samples[self.i].type]

    def options(self, conf):
        return list(range(len(self._out().loss_hi)))

    def context(self, conf):
        return (self._out(), self.timeouts[self.i])

    def diff(self, current, target):
        return () if current == target else (PlanStep("setOption", None, target),)

    def failsafe_steps(self):
        return (PlanStep("failsafe", None, None),)

    def apply(self, current, plan):
        step = plan.steps[-1]
        self.current = FAILSAFE if step.kind == "failsafe" else step.value


def native_outcomes(sc: StubScenario, timeouts, planner=None) -> tuple[int, ...]:
    """Decision code per sample with the given per-sample time-out choices."""
    goals = (
        Goal("packetLoss", 1, comparator="<", threshold=sc.goal / 10000),
        Goal("energy", 2, direction="min"),
    )
    reg = Registry([_StubModel("packetLoss", PROBABILITY), _StubModel("energy", MEAN)])
    system = StubSystem(sc, timeouts)
    loop = FeedbackLoop(Knowledge(goals, reg), system)
    out = []
    for _ in sc.samples:
        d = loop.step()
        if not d.analyzed:
            out.append(SKIPPED)
        elif d.failsafe:
            out.append(FAILSAFE)
        elif d.plan_steps == 0:
            out.append(NOCHANGE)
        else:
            out.append(d.chosen)
    return tuple(out)


def timeout_choices(sc: StubScenario):
    """Every per-sample time-out vector the verifier stub allows."""
    per = [(False, True) if sc.verifier[s.type].timeout_after else (False,) for s in sc.samples]
    return itertools.product(*per)
