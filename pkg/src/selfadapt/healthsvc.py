"""Service-based health assistance workflow as a second managed system.

A run either raises an alarm directly (panic button) or invokes a medical
analysis service followed by a drug change or an indirect alarm. A run fails
when any invoked service fails; services fail independently. Cost and
response time add up over the invoked services, whatever their outcome.

Draw ``d`` of run ``i`` is ``uniform_batch(run_keys(seed, [i]), d)``:
0 direct alarm?, 1 drug change?, 2 analysis fails?, 3 drug fails?,
4 alarm fails?. The scalar and vectorised paths consume them identically.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .knowledge import Configuration, Goal, PlanStep
from .qmodels import MEAN, PROBABILITY, QualityModel, SMCSettings
from .rng import Stream, derive_seed, run_keys, uniform_batch
from .smc import Estimate, estimate_mean, estimate_probability

SERVICE_TYPES = ("MedicalAnalysis", "Drug", "Alarm")
ANALYSIS, DRUG, ALARM = 0, 1, 2


@dataclass(frozen=True)
class ServiceCatalog:
    failure: tuple[tuple[float, ...], ...]  # per type, per provider
    cost: tuple[tuple[float, ...], ...]
    time: tuple[tuple[float, ...], ...]  # response time, ms

    def __post_init__(self):
        for name, table in (("failure", self.failure), ("cost", self.cost), ("time", self.time)):
            if len(table) != len(SERVICE_TYPES):
                raise ValueError(f"{name}: need one row per service type")
        for t in range(len(SERVICE_TYPES)):
            n = len(self.failure[t])
            if n == 0:
                raise ValueError(f"{SERVICE_TYPES[t]}: no providers")
            if len(self.cost[t]) != n or len(self.time[t]) != n:
                raise ValueError(f"{SERVICE_TYPES[t]}: rows differ in length")
            if not all(0.0 <= f <= 1.0 for f in self.failure[t]):
                raise ValueError(f"{SERVICE_TYPES[t]}: failure rates must lie in [0, 1]")
            if any(c < 0 for c in self.cost[t]) or any(x < 0 for x in self.time[t]):
                raise ValueError(f"{SERVICE_TYPES[t]}: costs and times must be >= 0")

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(r) for r in self.failure)

    def scaled_failures(self, factor: float) -> "ServiceCatalog":
        return ServiceCatalog(tuple(tuple(min(1.0, f * factor) for f in r) for r in self.failure), self.cost, self.time)


@dataclass(frozen=True)
class WorkflowParams:
    p_emergency: int = 22
    p_analysis: int = 78
    p_change_medication: int = 66
    p_indirect_emergency: int = 34

    def __post_init__(self):
        if self.p_emergency + self.p_analysis != 100:
            raise ValueError("p_EMERGENCY + p_ANALYSIS must be 100")
        if self.p_change_medication + self.p_indirect_emergency != 100:
            raise ValueError("p_CHANGE_MEDICATION + p_INDIRECT_EMERGENCY must be 100")
        if min(self.p_emergency, self.p_analysis, self.p_change_medication, self.p_indirect_emergency) < 0:
            raise ValueError("probabilities must be nonnegative percentages")


# Failure rates from the reference setting; costs and response times are
# invented fixture data.
DEFAULT_FAILURES = (
    (0.11, 0.04, 0.18, 0.08),
    (0.12, 0.07, 0.18, 0.10, 0.15),
    (0.01, 0.03, 0.05, 0.07, 0.02),
)
DOUBLED_FAILURES = (
    (0.22, 0.08, 0.36, 0.16),
    (0.24, 0.14, 0.36, 0.20, 0.30),
    (0.02, 0.06, 0.10, 0.14, 0.04),
)
FIXTURE_COSTS = (
    (9.8, 8.9, 9.3, 7.3),
    (7.3, 11.9, 5.0, 7.4, 5.4),
    (4.1, 2.5, 6.8, 5.5, 3.9),
)
FIXTURE_TIMES = (
    (22.0, 27.0, 31.0, 29.0),
    (40.0, 34.0, 45.0, 38.0, 50.0),
    (11.0, 9.0, 14.0, 12.0, 10.0),
)
DEFAULT_CATALOG = ServiceCatalog(DEFAULT_FAILURES, FIXTURE_COSTS, FIXTURE_TIMES)
DOUBLED_CATALOG = ServiceCatalog(DOUBLED_FAILURES, FIXTURE_COSTS, FIXTURE_TIMES)
DEFAULT_PARAMS = WorkflowParams()


def load_catalog(spec) -> tuple[ServiceCatalog, WorkflowParams]:
    """``{"failure": [[...]x3], "cost": ..., "time": ..., "params": {"pEmergency": 22, ...}}``."""
    if not isinstance(spec, Mapping):
        with open(spec, encoding="utf-8") as fh:
            spec = json.load(fh)
    unknown = set(spec) - {"failure", "cost", "time", "params"}
    if unknown:
        raise ValueError(f"unknown catalog fields {sorted(unknown)}")
    cat = ServiceCatalog(
        tuple(tuple(map(float, r)) for r in spec["failure"]),
        tuple(tuple(map(float, r)) for r in spec.get("cost", FIXTURE_COSTS)),
        tuple(tuple(map(float, r)) for r in spec.get("time", FIXTURE_TIMES)),
    )
    p = spec.get("params", {})
    params = WorkflowParams(
        int(p.get("pEmergency", 22)),
        int(p.get("pAnalysis", 78)),
        int(p.get("pChangeMedication", 66)),
        int(p.get("pIndirectEmergency", 34)),
    )
    return cat, params


def check_combo(combo: Sequence[int], catalog: ServiceCatalog) -> tuple[int, int, int]:
    combo = tuple(int(c) for c in combo)
    if len(combo) != 3 or any(not 0 <= c < n for c, n in zip(combo, catalog.sizes)):
        raise ValueError(f"combination {combo} outside catalog sizes {catalog.sizes}")
    return combo


def enumerate_combinations(catalog: ServiceCatalog) -> list[tuple[int, int, int]]:
    return list(itertools.product(*(range(n) for n in catalog.sizes)))


@dataclass(frozen=True)
class Outcome:
    failed: bool
    cost: float
    response_time: float


def run_workflow(combo, params: WorkflowParams, catalog: ServiceCatalog, rng: Stream) -> Outcome:
    m, d, a = check_combo(combo, catalog)
    u = [rng.random() for _ in range(5)]
    if u[0] * 100 < params.p_emergency:
        invoked = [(ALARM, a, u[4])]
    elif u[1] * 100 < params.p_change_medication:
        invoked = [(ANALYSIS, m, u[2]), (DRUG, d, u[3])]
    else:
        invoked = [(ANALYSIS, m, u[2]), (ALARM, a, u[4])]
    failed = any(x < catalog.failure[t][p] for t, p, x in invoked)
    cost = sum(catalog.cost[t][p] for t, p, _ in invoked)
    rt = sum(catalog.time[t][p] for t, p, _ in invoked)
    return Outcome(failed, cost, rt)


def _paths(keys, params):
    direct = uniform_batch(keys, 0) * 100 < params.p_emergency
    drug = ~direct & (uniform_batch(keys, 1) * 100 < params.p_change_medication)
    alarm_after = ~direct & ~drug
    return direct, drug, alarm_after


def failure_sampler(combo, params: WorkflowParams, catalog: ServiceCatalog):
    m, d, a = check_combo(combo, catalog)
    fm, fd, fa = catalog.failure[0][m], catalog.failure[1][d], catalog.failure[2][a]

    def sample(seed, indices):
        keys = run_keys(seed, indices)
        direct, drug, alarm_after = _paths(keys, params)
        m_fail = uniform_batch(keys, 2) < fm
        d_fail = uniform_batch(keys, 3) < fd
        a_fail = uniform_batch(keys, 4) < fa
        failed = (direct & a_fail) | (drug & (m_fail | d_fail)) | (alarm_after & (m_fail | a_fail))
        return failed.astype(np.float64)

    return sample


def _additive_sampler(table, combo, params, catalog):
    m, d, a = check_combo(combo, catalog)
    cm, cd, ca = table[0][m], table[1][d], table[2][a]

    def sample(seed, indices):
        keys = run_keys(seed, indices)
        direct, drug, _ = _paths(keys, params)
        return np.where(direct, ca, np.where(drug, cm + cd, cm + ca))

    return sample


def cost_sampler(combo, params, catalog):
    return _additive_sampler(catalog.cost, combo, params, catalog)


def response_time_sampler(combo, params, catalog):
    return _additive_sampler(catalog.time, combo, params, catalog)


def predict_failure_rate(combo, params=DEFAULT_PARAMS, catalog=DEFAULT_CATALOG, epsilon=0.05, alpha=0.05, seed=0) -> Estimate:
    return estimate_probability(failure_sampler(combo, params, catalog), epsilon, alpha, seed)


def predict_cost(combo, params=DEFAULT_PARAMS, catalog=DEFAULT_CATALOG, rsem=0.05, seed=0, **kw) -> Estimate:
    return estimate_mean(cost_sampler(combo, params, catalog), rsem, seed, **kw)


def response_time_model(combo, params=DEFAULT_PARAMS, catalog=DEFAULT_CATALOG, rsem=0.05, seed=0, **kw) -> Estimate:
    return estimate_mean(response_time_sampler(combo, params, catalog), rsem, seed, **kw)


# -- quality models for the feedback loop ----------------------------------------

@dataclass(frozen=True)
class HealthContext:
    params: WorkflowParams
    catalog: ServiceCatalog


FAILURE_RATE = QualityModel("failureRate", PROBABILITY, lambda c, s: failure_sampler(s, c.params, c.catalog))
COST = QualityModel("cost", MEAN, lambda c, s: cost_sampler(s, c.params, c.catalog))
RESPONSE_TIME = QualityModel("responseTime", MEAN, lambda c, s: response_time_sampler(s, c.params, c.catalog))


def health_goals(threshold: float = 0.10) -> tuple:
    return (
        Goal("failureRate", 1, comparator="<", threshold=threshold),
        Goal("cost", 2, direction="min"),
    )


def most_reliable(catalog: ServiceCatalog) -> tuple[int, int, int]:
    return tuple(min(range(len(r)), key=lambda i: (r[i], i)) for r in catalog.failure)


class HealthSystem:
    """The workflow as a managed system; each cycle serves ``invocations`` requests.

    The failsafe binds the most reliable provider of every service type.
    """

    def __init__(self, catalog=DEFAULT_CATALOG, params=DEFAULT_PARAMS, combo=(0, 0, 0), seed=0, invocations=100):
        self.catalog = catalog
        self.params = params
        self.combo = check_combo(combo, catalog)
        self.seed = seed
        self.invocations = invocations
        self.cycle = 0
        self._pending: Optional[tuple] = None
        self._last: Optional[dict] = None
        self.history: list[dict] = []

    def advance(self) -> dict:
        if self._pending is not None:
            self.combo, self._pending = self._pending, None
        base = derive_seed(self.seed, self.cycle)
        runs = [run_workflow(self.combo, self.params, self.catalog, Stream.from_seed(derive_seed(base, i)))
                for i in range(self.invocations)]
        n = max(1, len(runs))
        self._last = {
            "failureRate": sum(r.failed for r in runs) / n,
            "cost": sum(r.cost for r in runs) / n,
            "responseTime": sum(r.response_time for r in runs) / n,
        }
        self.history.append(dict(self._last, combo=self.combo))
        self.cycle += 1
        return dict(self._last)

    def probe(self) -> Configuration:
        if self._last is None:
            raise RuntimeError("probe before the first cycle")
        return Configuration(self.combo, dict(self._last), {"failureRates": tuple(itertools.chain(*self.catalog.failure))})

    def options(self, conf):
        return enumerate_combinations(self.catalog)

    def context(self, conf):
        return HealthContext(self.params, self.catalog)

    def diff(self, current, target):
        return tuple(PlanStep("setProvider", SERVICE_TYPES[t], target[t]) for t in range(3) if current[t] != target[t])

    def failsafe_steps(self):
        return (PlanStep("failsafe", None, None),)

    def apply(self, current, plan):
        combo = list(current)
        for s in plan.steps:
            if s.kind == "failsafe":
                combo = list(most_reliable(self.catalog))
            elif s.kind == "setProvider":
                combo[SERVICE_TYPES.index(s.element)] = s.value
            else:
                raise ValueError(f"unknown plan step {s.kind!r}")
        self._pending = check_combo(combo, self.catalog)
