"""Online evolution of goals and quality models.

An update is staged, validated in a sandbox and then activated. Activation
posts the update to a mailbox that is drained only at a quiescent point,
after Execute and before the next Monitor, so every cycle works with one
coherent (goals, registry) snapshot. Between cycles the loop is already
quiescent and the update applies at once.
"""

from __future__ import annotations

import json
import math
import queue
import threading
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

from .knowledge import Goal, check_goals
from .qmodels import ENERGY, LATENCY, MEAN, PACKET_LOSS, QualityModel, Registry
from .qmodels import dsl as _dsl

MODEL_CATALOG = {
    ("packetLoss", "native"): PACKET_LOSS,
    ("energy", "native"): ENERGY,
    ("latency", "native"): LATENCY,
    ("packetLoss", "dsl"): QualityModel(
        "packetLoss", PACKET_LOSS.kind, lambda c, s: _dsl.packet_loss_sampler(c.topology, s, c.uncertainty)
    ),
    ("energy", "dsl"): QualityModel(
        "energy", MEAN, lambda c, s: _dsl.energy_sampler(c.topology, s, c.uncertainty), ENERGY.offset
    ),
    ("latency", "dsl"): QualityModel("latency", MEAN, lambda c, s: _dsl.latency_sampler(c.topology, s, c.uncertainty)),
}


class UpdateError(RuntimeError):
    pass


@dataclass(frozen=True)
class UpdatePackage:
    """Goals are raw dicts (checked during validation); models are QualityModels."""

    name: str = "update"
    goals: tuple = ()
    models: tuple = ()
    budget: Optional[int] = None
    validate_with_stubs: bool = True

    @property
    def empty(self) -> bool:
        return not self.goals and not self.models and self.budget is None


def load_package(spec) -> UpdatePackage:
    """``{"name", "goals": [...], "models": [{"quality", "implementation"}], "budget"}``."""
    if not isinstance(spec, Mapping):
        with open(spec, encoding="utf-8") as fh:
            spec = json.load(fh)
    unknown = set(spec) - {"name", "goals", "models", "budget", "validateWithStubs"}
    if unknown:
        raise UpdateError(f"unknown package fields {sorted(unknown)}")
    models = []
    for m in spec.get("models", ()):
        key = (m["quality"], m.get("implementation", "native"))
        if key not in MODEL_CATALOG:
            raise UpdateError(f"no quality model {key[0]!r} with implementation {key[1]!r}")
        models.append(MODEL_CATALOG[key])
    budget = spec.get("budget")
    return UpdatePackage(
        name=str(spec.get("name", "update")),
        goals=tuple(dict(g) for g in spec.get("goals", ())),
        models=tuple(models),
        budget=None if budget is None else int(budget),
        validate_with_stubs=bool(spec.get("validateWithStubs", True)),
    )


def latency_package(threshold: float = 5.0, implementation: str = "native") -> UpdatePackage:
    """Latency below ``threshold`` percent, ranked after packet loss and before energy."""
    return UpdatePackage(
        name="latency",
        goals=(
            {"quality": "latency", "rank": 2, "comparator": "<", "threshold": threshold},
            {"quality": "energy", "rank": 3, "direction": "min"},
        ),
        models=(MODEL_CATALOG[("latency", implementation)],),
    )


@dataclass
class Handle:
    package: UpdatePackage
    validated: Optional[bool] = None
    report: Optional["ValidationReport"] = None
    goals: tuple = ()
    registry: Optional[Registry] = None


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)  # (name, passed, detail)

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def add(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks.append((name, bool(ok), detail))

    def lines(self) -> list[str]:
        return [f"{'PASS' if ok else 'FAIL'} {name}" + (f": {d}" if d else "") for name, ok, d in self.checks]


def merge_goals(current, updates) -> tuple:
    """Package goals replace current goals on the same quality; the rest are kept."""
    new = [Goal.from_dict(g) if not isinstance(g, Goal) else g for g in updates]
    touched = {g.quality for g in new}
    return check_goals([g for g in current if g.quality not in touched] + new)


class EvolutionManager:
    """Stages, validates and activates updates for one feedback loop."""

    def __init__(self, loop, smoke_runs: int = 20):
        self.loop = loop
        self.smoke_runs = smoke_runs
        self._staged: Optional[Handle] = None
        self._mailbox: queue.SimpleQueue = queue.SimpleQueue()
        self._lock = threading.Lock()
        self.activated: list[tuple[int, str]] = []
        loop.quiescent.append(self._at_quiescence)

    @property
    def staged(self) -> Optional[Handle]:
        return self._staged

    def stage_update(self, pkg: UpdatePackage) -> Handle:
        if self._staged is not None:
            raise UpdateError("another update is already staged")
        if not isinstance(pkg, UpdatePackage):
            raise UpdateError("malformed update package")
        if pkg.empty:
            raise UpdateError("empty update")
        self._staged = Handle(pkg)
        return self._staged

    def discard(self, handle: Handle) -> None:
        if handle is not self._staged:
            raise UpdateError("handle is not staged")
        self._staged = None

    def validate_update(self, handle: Handle, seed: int = 0) -> ValidationReport:
        if handle is not self._staged:
            raise UpdateError("handle is not staged")
        k = self.loop.knowledge
        pkg = handle.package
        rep = ValidationReport()
        goals = None
        try:
            goals = merge_goals(k.goals, pkg.goals)
            rep.add("goals well-formed", True)
        except (ValueError, KeyError, TypeError) as exc:
            rep.add("goals well-formed", False, str(exc))
        reg = k.registry.copy()
        try:
            for m in pkg.models:
                if m.name in reg:
                    raise ValueError(f"quality {m.name!r} is already registered")
                reg.register(m)
            rep.add("models registrable", True)
        except ValueError as exc:
            rep.add("models registrable", False, str(exc))
        if goals is not None:
            missing = sorted({g.quality for g in goals} - set(reg.names()))
            rep.add("goal qualities resolvable", not missing, ", ".join(missing))
        if pkg.budget is not None:
            rep.add("budget positive", pkg.budget > 0, str(pkg.budget))
        if pkg.validate_with_stubs:
            self._stub_checks(rep)
        if rep.passed and pkg.models:
            self._smoke(rep, pkg, seed)
        handle.validated = rep.passed
        handle.report = rep
        if rep.passed:
            handle.goals = goals
            handle.registry = reg
        return rep

    def _stub_checks(self, rep: ValidationReport) -> None:
        from .verify import verify_suite

        for res in verify_suite():
            for v in res.verdicts:
                rep.add(f"{res.scenario.name}: {v.prop.name}", v.holds, v.prop.text)

    def _smoke(self, rep: ValidationReport, pkg: UpdatePackage, seed: int) -> None:
        """Run each new model briefly on the live context, without touching the loop."""
        k = self.loop.knowledge
        if k.current is None:
            rep.add("models run", True, "no probe yet, skipped")
            return
        ctx = self.loop.system.context(k.current)
        for m in pkg.models:
            try:
                est = m.estimate(ctx, k.current.settings, k.smc, seed, limit=self.smoke_runs)
                ok = est.runs > 0 and math.isfinite(est.point)
                rep.add(f"model {m.name} runs", ok, f"{est.point:.6g} over {est.runs} runs")
            except Exception as exc:  # sandbox: any failure is a validation failure
                rep.add(f"model {m.name} runs", False, repr(exc))

    def activate_update(self, handle: Handle) -> None:
        """Apply the update at the next quiescent point: now if the loop is
        between cycles, otherwise when the running cycle finishes."""
        if handle is not self._staged:
            raise UpdateError("handle is not staged")
        if not handle.validated:
            raise UpdateError("update has not passed validation")
        self._staged = None
        self._mailbox.put(handle)
        if not self.loop.busy:
            ev = self._at_quiescence(self.loop.knowledge, self.loop.cycle)
            if ev:
                self.loop.add_event(ev)

    def _at_quiescence(self, knowledge, cycle: int):
        with self._lock:
            return self._drain(knowledge, cycle)

    def _drain(self, knowledge, cycle: int):
        events = []
        while True:
            try:
                h = self._mailbox.get_nowait()
            except queue.Empty:
                break
            knowledge.goals = h.goals
            knowledge.registry = h.registry
            if h.package.budget is not None:
                knowledge.budget = h.package.budget
            # in-flight results belong to the old snapshot; forgetting the last
            # probe makes the next cycle analyze afresh
            knowledge.options = []
            knowledge.current = None
            self.activated.append((cycle, h.package.name))
            events.append(f"activate:{h.package.name}")
        return ";".join(events) or None
