from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import workflow_cost, workflow_failure
from selfadapt.healthsvc import (
    DEFAULT_CATALOG,
    DEFAULT_PARAMS,
    DOUBLED_CATALOG,
    COST,
    FAILURE_RATE,
    HealthContext,
    HealthSystem,
    ServiceCatalog,
    WorkflowParams,
    check_combo,
    cost_sampler,
    enumerate_combinations,
    failure_sampler,
    health_goals,
    load_catalog,
    most_reliable,
    predict_cost,
    predict_failure_rate,
    response_time_sampler,
    run_workflow,
)
from selfadapt.experiment import data_file
from selfadapt.knowledge import Plan, PlanStep
from selfadapt.mape import FeedbackLoop, Knowledge
from selfadapt.qmodels import Registry, SMCSettings
from selfadapt.rng import Stream, child_key, seed_key
from selfadapt.smc import simulate_series

CAT = DEFAULT_CATALOG


def exact_failure(combo, cat=CAT):
    m, d, a = combo
    return workflow_failure(cat.failure[0][m], cat.failure[1][d], cat.failure[2][a])


def test_oracle_hand_values():
    # only the alarm can fail: 0.22 fA + 0.78 * 0.34 fA = 0.4852 fA
    assert workflow_failure(0, 0, Fraction(1, 10)) == Fraction(4852, 100000)
    # never emergency: cost = cM + 0.66 cD + 0.34 cA
    assert workflow_cost(1, 1, 1, pe=0) == 2


def test_catalog_shape():
    assert CAT.sizes == (4, 5, 5)
    assert len(enumerate_combinations(CAT)) == 100
    assert enumerate_combinations(CAT)[:2] == [(0, 0, 0), (0, 0, 1)]
    assert most_reliable(CAT) == (1, 1, 0)


def test_doubled_catalog_doubles_rates():
    assert DOUBLED_CATALOG.failure == CAT.scaled_failures(2).failure


@pytest.mark.parametrize(
    "kw",
    [
        {"failure": ((0.1,), (0.1,))},
        {"failure": ((1.5,), (0.1,), (0.1,))},
        {"failure": ((), (0.1,), (0.1,))},
    ],
)
def test_catalog_validation(kw):
    base = {"failure": ((0.1,), (0.1,), (0.1,)), "cost": ((1.0,), (1.0,), (1.0,)), "time": ((1.0,), (1.0,), (1.0,))}
    base.update(kw)
    with pytest.raises(ValueError):
        ServiceCatalog(**base)


def test_params_validation():
    with pytest.raises(ValueError):
        WorkflowParams(30, 78, 66, 34)
    with pytest.raises(ValueError):
        WorkflowParams(22, 78, 60, 34)


def test_check_combo():
    assert check_combo([1, 2, 3], CAT) == (1, 2, 3)
    with pytest.raises(ValueError):
        check_combo((4, 0, 0), CAT)
    with pytest.raises(ValueError):
        check_combo((0, 0), CAT)


def test_load_catalog_file():
    cat, params = load_catalog(data_file("health_catalog.json"))
    assert cat.failure == CAT.failure and params == DEFAULT_PARAMS
    with pytest.raises(ValueError):
        load_catalog({"failure": CAT.failure, "colour": 1})


@given(st.sampled_from(enumerate_combinations(CAT)), st.integers(0, 10**6), st.integers(0, 50))
@settings(max_examples=40, deadline=None)
def test_vector_samplers_match_scalar_workflow(combo, seed, i):
    rng = Stream(child_key(seed_key(seed), i))
    out = run_workflow(combo, DEFAULT_PARAMS, CAT, rng)
    idx = np.array([i])
    assert failure_sampler(combo, DEFAULT_PARAMS, CAT)(seed, idx)[0] == float(out.failed)
    assert cost_sampler(combo, DEFAULT_PARAMS, CAT)(seed, idx)[0] == pytest.approx(out.cost)
    assert response_time_sampler(combo, DEFAULT_PARAMS, CAT)(seed, idx)[0] == pytest.approx(out.response_time)


def test_failure_estimates_near_closed_form():
    for combo in enumerate_combinations(CAT)[::9]:
        est = predict_failure_rate(combo, epsilon=0.02, alpha=0.05, seed=3)
        assert abs(est.point - float(exact_failure(combo))) <= 0.02


def test_cost_estimate_near_closed_form():
    combo = (1, 1, 1)
    c = CAT.cost
    want = float(workflow_cost(c[0][1], c[1][1], c[2][1]))
    est = predict_cost(combo, rsem=0.002, max_runs=100_000, seed=1)
    assert abs(est.point - want) / want < 0.01


def test_goals_choose_cheapest_reliable_combo():
    # analytic plan: among combos with p + 0.005 < T, pick the cheapest expected cost
    # T separates (1,1,1) at 0.0800 from the cheaper (1,3,0) at 0.0854 with
    # a margin of over two standard errors of the estimate on each side
    T = 0.088
    exact = {c: float(exact_failure(c)) for c in enumerate_combinations(CAT)}
    costs = {c: float(workflow_cost(CAT.cost[0][c[0]], CAT.cost[1][c[1]], CAT.cost[2][c[2]])) for c in exact}
    ok = [c for c in exact if exact[c] + 0.005 < T]
    want = min(ok, key=lambda c: costs[c])
    assert want == (1, 1, 1)
    k = Knowledge(health_goals(T), Registry([FAILURE_RATE, COST]),
                  SMCSettings(epsilon=0.005, alpha=0.05, rsem=0.002, max_runs=100_000), budget=50_000_000)
    sysm = HealthSystem(combo=(0, 0, 0), seed=2)
    d = FeedbackLoop(k, sysm, seed=2).step()
    assert d.chosen is not None and not d.partial
    assert enumerate_combinations(CAT)[d.chosen] == want


def test_health_system_applies_plan_next_cycle():
    sysm = HealthSystem(combo=(0, 0, 0), seed=1, invocations=10)
    sysm.advance()
    conf = sysm.probe()
    steps = sysm.diff(conf.settings, (1, 2, 3))
    assert [s.value for s in steps] == [1, 2, 3]
    sysm.apply(conf.settings, Plan(steps))
    assert sysm.combo == (0, 0, 0)
    sysm.advance()
    assert sysm.combo == (1, 2, 3)
    sysm.apply(sysm.combo, Plan(sysm.failsafe_steps(), True))
    sysm.advance()
    assert sysm.combo == most_reliable(CAT)
    with pytest.raises(ValueError):
        sysm.apply(sysm.combo, Plan((PlanStep("reboot", None, None),)))


def test_health_probe_before_cycle():
    with pytest.raises(RuntimeError):
        HealthSystem().probe()


def test_workflow_paths_frequencies():
    # the emergency path invokes only the alarm service: cost equals cA
    xs = simulate_series(cost_sampler((0, 0, 0), DEFAULT_PARAMS, CAT), 5000, 0)
    share = np.mean(np.isclose(xs, CAT.cost[2][0]))
    assert abs(share - 0.22) < 0.02
