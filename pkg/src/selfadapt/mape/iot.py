"""DeltaIoT as a managed system of the feedback loop."""

from __future__ import annotations

import itertools

from ..deltaiot import (
    DeltaIoTSimulator,
    NetworkSettings,
    Topology,
    UncertaintyState,
    failsafe_settings,
    min_power_for_link,
    uncertainty_from_probe,
)
from ..qmodels import IoTContext
from .knowledge import Configuration, Goal, Plan, PlanStep

FACTOR_GRID = (0, 20, 40, 60, 80, 100)

DEFAULT_GOALS = (
    Goal("packetLoss", 1, comparator="<", threshold=0.10),
    Goal("energy", 2, direction="min"),
)
LATENCY_GOAL = Goal("latency", 2, comparator="<", threshold=5.0)


def enumerate_options(topology: Topology, uncertainty: UncertaintyState) -> list[NetworkSettings]:
    """Minimum workable power per link times the factor grid of two-parent motes.

    Order is lexicographic over the two-parent motes by id, with the factor of
    each mote's first parent link ascending; the second link gets the rest.
    """
    power = tuple(min_power_for_link(i, uncertainty) for i in range(len(topology.links)))
    base = [0] * len(topology.links)
    splits = []
    for mote, links in sorted(topology.parent_links.items()):
        if len(links) == 1:
            base[links[0]] = 100
        else:
            splits.append(links)
    out = []
    for combo in itertools.product(FACTOR_GRID, repeat=len(splits)):
        f = list(base)
        for (a, b), x in zip(splits, combo):
            f[a], f[b] = x, 100 - x
        out.append(NetworkSettings(power, tuple(f)))
    return out


def settings_diff(current: NetworkSettings, target: NetworkSettings) -> tuple[PlanStep, ...]:
    steps = []
    for i, (a, b) in enumerate(zip(current.power, target.power)):
        if a != b:
            steps.append(PlanStep("setPower", i, b))
    for i, (a, b) in enumerate(zip(current.factors, target.factors)):
        if a != b:
            steps.append(PlanStep("setDistribution", i, b))
    return tuple(steps)


def apply_steps(topology: Topology, current: NetworkSettings, steps) -> NetworkSettings:
    power, factors = list(current.power), list(current.factors)
    for s in steps:
        if s.kind == "failsafe":
            return failsafe_settings(topology)
        if s.kind == "setPower":
            power[s.element] = s.value
        elif s.kind == "setDistribution":
            factors[s.element] = s.value
        else:
            raise ValueError(f"unknown plan step {s.kind!r}")
    out = NetworkSettings(tuple(power), tuple(factors))
    out.validate(topology)
    return out


class DeltaIoTSystem:
    """Adapter from :class:`DeltaIoTSimulator` to the loop's managed-system protocol."""

    def __init__(self, simulator: DeltaIoTSimulator):
        self.sim = simulator
        self.topology = simulator.topology
        self.effector_calls = 0

    def advance(self) -> dict:
        s = self.sim.run_cycle()
        return {"packetLoss": s.packet_loss, "energy": s.energy, "latency": s.latency_pct}

    def probe(self) -> Configuration:
        return self.sim.probe()

    def uncertainty(self, conf: Configuration) -> UncertaintyState:
        return uncertainty_from_probe(self.topology, conf)

    def options(self, conf: Configuration):
        return enumerate_options(self.topology, self.uncertainty(conf))

    def context(self, conf: Configuration):
        return IoTContext(self.topology, self.uncertainty(conf))

    def diff(self, current, target):
        return settings_diff(current, target)

    def failsafe_steps(self):
        return (PlanStep("failsafe", None, None),)

    def apply(self, current: NetworkSettings, plan: Plan) -> None:
        new = apply_steps(self.topology, current, plan.steps)
        self.effector_calls += 1
        self.sim.apply_settings(new)
