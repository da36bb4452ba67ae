import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from selfadapt.deltaiot import DELTAIOT15, DeltaIoTSimulator, UncertaintyState, default_settings, failsafe_settings
from selfadapt.knowledge import AdaptationOption, Configuration, Goal, Plan, PlanStep, check_goals
from selfadapt.mape import (
    DEFAULT_GOALS,
    LOG_HEADER,
    DeltaIoTSystem,
    FeedbackLoop,
    Knowledge,
    analyze,
    apply_steps,
    enumerate_options,
    load_goals,
    select,
    settings_diff,
    write_log,
)
from selfadapt.qmodels import MEAN, PROBABILITY, QualityModel, Registry, SMCSettings
from selfadapt.smc import Estimate
from toys import TOY_GOALS, TOY_MODELS, Toy, _const, toy_loop


def est(point, half=0.0):
    return Estimate(point, point - half, point + half, 10)


# -- goals --------------------------------------------------------------------

def test_goal_validation():
    with pytest.raises(ValueError):
        Goal("x", 1, "<", float("nan"))
    with pytest.raises(ValueError):
        Goal("x", 1, "~", 0.1)
    with pytest.raises(ValueError):
        Goal("x", 1)
    with pytest.raises(ValueError):
        check_goals([Goal("a", 1, direction="min"), Goal("b", 1, direction="max")])
    with pytest.raises(ValueError):
        check_goals([])


def test_satisfaction_uses_interval_bound():
    g = Goal("loss", 1, "<", 0.10)
    assert g.satisfied_by(Estimate(0.04, 0.0, 0.09, 1))
    assert not g.satisfied_by(Estimate(0.06, 0.01, 0.11, 1))
    h = Goal("rel", 1, ">=", 0.9)
    assert h.satisfied_by(Estimate(0.95, 0.9, 1.0, 1))
    assert not h.satisfied_by(Estimate(0.95, 0.89, 1.0, 1))


def test_goal_dict_round_trip():
    for g in DEFAULT_GOALS:
        assert Goal.from_dict(g.to_dict()) == g
    with pytest.raises(ValueError):
        Goal.from_dict({"quality": "x", "rank": 1, "direction": "min", "extra": 1})


def test_load_goals_sorts_by_rank():
    goals = load_goals({"goals": [{"quality": "energy", "rank": 2, "direction": "min"},
                                  {"quality": "packetLoss", "rank": 1, "comparator": "<", "threshold": 0.1}]})
    assert goals == DEFAULT_GOALS


def test_better_comparator():
    g = Goal("energy", 2, direction="min")
    a, b = Configuration(0, {"energy": 1.0}), Configuration(0, {"energy": 2.0})
    assert g.better(a, b) and not g.better(b, a)


def test_configuration_rejects_nonfinite():
    with pytest.raises(ValueError):
        Configuration(0, {"x": math.inf})


# -- selection ----------------------------------------------------------------

def _opts(rows):
    return [AdaptationOption(i, i, {"loss": est(l, 0.05), "cost": est(c)}) for i, (l, c) in enumerate(rows)]


def test_select_filters_then_minimises():
    opts = _opts([(0.30, 1.0), (0.10, 5.0), (0.05, 3.0), (0.16, 2.0)])
    assert [o.index for o in select(TOY_GOALS, opts)] == [2]


def test_select_ties_go_to_lowest_index():
    opts = _opts([(0.05, 3.0), (0.05, 3.0)])
    assert [o.index for o in select(TOY_GOALS, opts)] == [0, 1]


def test_select_empty_when_nothing_complies():
    assert select(TOY_GOALS, _opts([(0.2, 1.0), (0.5, 1.0)])) == []


def test_select_drops_partial_estimates():
    opts = _opts([(0.05, 3.0), (0.05, 1.0)])
    opts[1].results["loss"] = Estimate(0.05, 0.0, 0.1, 5, partial=True)
    assert [o.index for o in select(TOY_GOALS, opts)] == [0]


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 100)), min_size=1, max_size=30))
def test_select_matches_brute_force(rows):
    opts = _opts(rows)
    got = select(TOY_GOALS, opts)
    ok = [i for i, (l, _) in enumerate(rows) if l + 0.05 < 0.2]
    if not ok:
        assert got == []
    else:
        best = min(rows[i][1] for i in ok)
        assert got[0].index == min(i for i in ok if rows[i][1] == best)


# -- the loop -----------------------------------------------------------------

def test_knowledge_rejects_goal_without_model():
    with pytest.raises(ValueError, match="without a model"):
        Knowledge((Goal("latency", 1, "<", 5.0),), TOY_MODELS.copy())
    with pytest.raises(ValueError):
        Knowledge(TOY_GOALS, TOY_MODELS.copy(), budget=0)


def test_loop_picks_cheapest_compliant_and_applies_next_cycle():
    loop = toy_loop([0.5, 0.0, 0.0, 0.6], [1.0, 4.0, 2.0, 0.5])
    d0 = loop.step()
    assert d0.analyzed and d0.chosen == 2 and not d0.failsafe and d0.plan_steps == 1
    assert d0.realized["cost"] == 1.0  # cycle 0 ran with the old setting
    d1 = loop.step()
    assert d1.realized["cost"] == 2.0
    assert d1.analyzed and d1.plan_steps == 0  # the settings changed
    assert not loop.step().analyzed  # nothing changed: no analysis


def test_unchanged_environment_gives_same_choice_and_empty_plan():
    loop = toy_loop([0.5, 0.0, 0.0], [1.0, 4.0, 2.0])
    loop.step()
    loop.system.env = 1  # force re-analysis
    d = loop.step()
    assert d.analyzed and d.chosen == 2 and d.plan_steps == 0


def test_failsafe_when_no_option_complies():
    loop = toy_loop([0.5, 0.6], [1.0, 2.0], start=1)
    d = loop.step()
    assert d.failsafe and d.chosen is None and "satisfies" in d.diagnostic
    assert loop.system.pending == 0


def test_budget_exhaustion_marks_partial():
    loop = toy_loop([0.0] * 4, [1.0] * 4, budget=800)
    d = loop.step()
    assert d.partial and d.runs <= 800


def test_effector_rejection_falls_back_to_failsafe():
    loop = toy_loop([0.5, 0.0], [1.0, 1.0])
    loop.system.diff = lambda cur, tgt: (PlanStep("set", None, 99),)
    d = loop.step()
    assert d.failsafe and "effector" in d.diagnostic


def test_analysis_error_falls_back_to_failsafe():
    loop = toy_loop([0.5, 0.0], [1.0, 1.0])
    loop.knowledge.registry = Registry([QualityModel("loss", PROBABILITY, lambda c, s: (lambda seed, i: np.full(len(i), np.nan))),
                                        QualityModel("cost", MEAN, _const)])
    d = loop.step()
    assert d.failsafe and "analysis failed" in d.diagnostic


def test_quiescent_hook_event_lands_on_next_row():
    loop = toy_loop([0.5, 0.0], [1.0, 1.0])
    loop.quiescent.append(lambda k, c: "tick" if c == 1 else None)
    rows = loop.run(3)
    assert [d.event for d in rows] == ["", "tick", ""]


def test_analysis_seeds_do_not_depend_on_cycle():
    k1 = Knowledge(TOY_GOALS, TOY_MODELS.copy())
    k2 = Knowledge(TOY_GOALS, TOY_MODELS.copy())
    toy = Toy([0.3, 0.1], [1, 2])
    a = analyze(k1, [0, 1], toy, seed=5)
    b = analyze(k2, [0, 1], toy, seed=5)
    assert [o.results for o in a] == [o.results for o in b]


def test_negative_cycles_rejected():
    with pytest.raises(ValueError):
        toy_loop([0.1], [1]).run(-1)


# -- decision log ---------------------------------------------------------------

def test_log_header_golden():
    assert LOG_HEADER == (
        "cycle", "optionsTotal", "optionsVerified", "chosenOptionIndex", "packetLossEst", "energyEst",
        "latencyEst", "planSteps", "failsafe", "partial", "analysisRuns", "event", "packetLoss", "energy",
        "latency",
    )


def test_write_log_rows():
    loop = toy_loop([0.5, 0.0], [1.0, 1.0])
    loop.run(2)
    buf = io.StringIO()
    write_log(loop.log, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(LOG_HEADER)
    assert lines[1].split(",")[:4] == ["0", "2", "2", "1"]
    assert len(lines) == 3


# -- DeltaIoT adapter -------------------------------------------------------------

def test_enumerate_options_shape_and_order():
    u = UncertaintyState.of(DELTAIOT15)
    opts = enumerate_options(DELTAIOT15, u)
    assert len(opts) == 216 and len(set(opts)) == 216
    motes = sorted(DELTAIOT15.two_parent_motes)
    first = [DELTAIOT15.parent_links[m][0] for m in motes]
    assert [opts[0].factors[i] for i in first] == [0, 0, 0]
    assert [opts[1].factors[i] for i in first] == [0, 0, 20]
    assert [opts[-1].factors[i] for i in first] == [100, 100, 100]
    for o in opts:
        o.validate(DELTAIOT15)


def test_diff_then_apply_reaches_target():
    T = DELTAIOT15
    u = UncertaintyState.of(T)
    cur = default_settings(T)
    for tgt in enumerate_options(T, u)[::37]:
        assert apply_steps(T, cur, settings_diff(cur, tgt)) == tgt
    assert apply_steps(T, cur, (PlanStep("failsafe", None, None),)) == failsafe_settings(T)
    with pytest.raises(ValueError):
        apply_steps(T, cur, (PlanStep("reboot", None, None),))


def test_deltaiot_system_counts_effector_calls():
    sysm = DeltaIoTSystem(DeltaIoTSimulator(DELTAIOT15, seed=1))
    sysm.advance()
    conf = sysm.probe()
    sysm.apply(conf.settings, Plan((PlanStep("failsafe", None, None),), True))
    assert sysm.effector_calls == 1
