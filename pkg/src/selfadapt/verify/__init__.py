"""Design-time verification of the feedback loop against stub scenarios."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from ..engine import AutomatonNetwork, parse_model
from .explore import (
    Coverage,
    Exploration,
    ExplorationBudgetExceeded,
    Property,
    Verdict,
    check,
    coverage_report,
    explore,
    explore_states,
    format_trace,
    load_properties,
    parse_property,
)
from .replay import native_outcomes, timeout_choices
from .scenario import (
    FAILSAFE,
    NOCHANGE,
    SKIPPED,
    UNSET,
    ScenarioError,
    StubScenario,
    bind_scenario,
    load_stub_scenario,
)

MAPE_AUTOMATA = ("Monitor", "Analyzer", "Planner", "Executor")
TRACE_VARIABLES = ("s", "current", "changed", "lossObs", "best", "planned", "applied", "timedOut")


def _models():
    return resources.files("selfadapt.models")


@lru_cache(maxsize=None)
def loop_model() -> AutomatonNetwork:
    return parse_model(_models().joinpath("mape_loop.anm").read_text(encoding="utf-8"))


def shipped_scenarios() -> list[StubScenario]:
    stubs = _models().joinpath("stubs")
    names = sorted(p.name for p in stubs.iterdir() if p.name.endswith(".json"))
    import json

    return [load_stub_scenario(json.loads(stubs.joinpath(n).read_text(encoding="utf-8"))) for n in names]


def shipped_properties() -> list[Property]:
    return load_properties(_models().joinpath("mape.props").read_text(encoding="utf-8"))


@dataclass
class ScenarioResult:
    scenario: StubScenario
    exploration: Exploration
    verdicts: list

    @property
    def holds(self) -> bool:
        return all(v.holds for v in self.verdicts)


def verify_scenario(net: AutomatonNetwork, sc: StubScenario, properties, **kw) -> ScenarioResult:
    ex, verdicts = explore(bind_scenario(net, sc), properties, **kw)
    return ScenarioResult(sc, ex, verdicts)


def verify_suite(net=None, scenarios=None, properties=None, **kw) -> list[ScenarioResult]:
    net = net or loop_model()
    scenarios = shipped_scenarios() if scenarios is None else scenarios
    properties = shipped_properties() if properties is None else properties
    return [verify_scenario(net, sc, properties, **kw) for sc in scenarios]


def model_outcomes(ex: Exploration) -> set:
    """Decision-code vectors of every run that processed all samples."""
    net = ex.net
    n = net.program.initial_values[net.program.slot("nsamples")]
    out = set()
    for st in ex.states.values():
        if st.location(net, "Probe") == "Finished":
            out.add(tuple(st.get(net, "outcome")[:n]))
    return out
