import numpy as np
import pytest

from selfadapt.evolve import (
    MODEL_CATALOG,
    EvolutionManager,
    UpdateError,
    UpdatePackage,
    latency_package,
    load_package,
    merge_goals,
)
from selfadapt.experiment import data_file
from selfadapt.knowledge import Goal
from selfadapt.qmodels import LATENCY, MEAN, QualityModel
from toys import TOY_GOALS, toy_loop

# option i has delay DELAY[i]; cheapest compliant option before the update is 2
RATE = [0.5, 0.0, 0.0, 0.0]
COST = [1.0, 4.0, 2.0, 3.0]
DELAY = [1.0, 1.0, 9.0, 1.0]

DELAY_MODEL = QualityModel("delay", MEAN, lambda ctx, i: (lambda seed, idx: np.full(len(idx), DELAY[i])))
DELAY_PKG = UpdatePackage(
    name="delay",
    goals=({"quality": "delay", "rank": 2, "comparator": "<", "threshold": 5.0},
           {"quality": "cost", "rank": 3, "direction": "min"}),
    models=(DELAY_MODEL,),
)


def manager():
    loop = toy_loop(RATE, COST)
    return loop, EvolutionManager(loop)


def test_staging_rules():
    loop, mgr = manager()
    with pytest.raises(UpdateError, match="empty"):
        mgr.stage_update(UpdatePackage())
    h = mgr.stage_update(DELAY_PKG)
    with pytest.raises(UpdateError, match="already staged"):
        mgr.stage_update(DELAY_PKG)
    with pytest.raises(UpdateError, match="validation"):
        mgr.activate_update(h)
    mgr.discard(h)
    assert mgr.staged is None
    with pytest.raises(UpdateError):
        mgr.discard(h)


def test_validation_reports_each_check():
    loop, mgr = manager()
    loop.step()
    h = mgr.stage_update(DELAY_PKG)
    rep = mgr.validate_update(h)
    assert rep.passed, rep.lines()
    names = [n for n, _, _ in rep.checks]
    assert names[:3] == ["goals well-formed", "models registrable", "goal qualities resolvable"]
    assert any(n.endswith(": correct") for n in names)
    assert "model delay runs" in names


@pytest.mark.parametrize(
    "pkg,failing",
    [
        (UpdatePackage(goals=({"quality": "delay", "rank": 5, "direction": "min"},)), "goal qualities resolvable"),
        (UpdatePackage(goals=({"quality": "cost", "rank": 2, "comparator": "<", "threshold": "x"},)), "goals well-formed"),
        (UpdatePackage(models=(QualityModel("cost", MEAN, lambda c, s: None),)), "models registrable"),
        (UpdatePackage(budget=0, validate_with_stubs=False), "budget positive"),
        (UpdatePackage(models=(QualityModel("boom", MEAN, lambda c, s: 1 / 0),), validate_with_stubs=False), "model boom runs"),
    ],
)
def test_validation_failures(pkg, failing):
    loop, mgr = manager()
    loop.step()
    h = mgr.stage_update(pkg)
    rep = mgr.validate_update(h)
    assert not rep.passed
    assert failing in [n for n, ok, _ in rep.checks if not ok]
    with pytest.raises(UpdateError):
        mgr.activate_update(h)


def test_activation_between_cycles_applies_to_next_cycle():
    loop, mgr = manager()
    d0 = loop.step()
    assert d0.chosen == 2
    h = mgr.stage_update(DELAY_PKG)
    mgr.validate_update(h)
    assert "delay" not in loop.knowledge.registry  # staging changes nothing
    mgr.activate_update(h)
    d1 = loop.step()
    assert d1.event == "activate:delay" and d1.analyzed
    assert d1.chosen == 3 and "delay" in d1.estimates
    assert [g.quality for g in loop.knowledge.goals] == ["loss", "delay", "cost"]
    assert mgr.activated == [(1, "delay")]


def test_activation_during_a_cycle_waits_for_its_end():
    loop, mgr = manager()
    loop.step()
    h = mgr.stage_update(DELAY_PKG)
    mgr.validate_update(h)
    seen = []
    advance = loop.system.advance

    def advance_and_activate():
        # stands in for another thread activating while Analyze is running
        if not seen:
            mgr.activate_update(h)
            seen.append("delay" in loop.knowledge.registry)
        return advance()

    loop.system.advance = advance_and_activate
    d1 = loop.step()
    assert seen == [False] and "delay" not in d1.estimates
    d2 = loop.step()
    assert d2.event == "activate:delay" and "delay" in d2.estimates
    assert mgr.activated == [(2, "delay")]


def test_activation_forces_analysis_in_static_environment():
    loop, mgr = manager()
    loop.run(3)
    assert not loop.log[-1].analyzed
    h = mgr.stage_update(DELAY_PKG)
    mgr.validate_update(h)
    mgr.activate_update(h)
    d = loop.step()
    assert d.analyzed and d.event == "activate:delay"


def test_pre_activation_rows_unchanged_by_staging():
    plain = toy_loop(RATE, COST)
    plain.run(4)
    loop, mgr = manager()
    loop.run(2)
    h = mgr.stage_update(DELAY_PKG)
    mgr.validate_update(h)
    loop.run(2)
    assert [d.row() for d in loop.log] == [d.row() for d in plain.log]


def test_merge_goals_replaces_same_quality():
    merged = merge_goals(TOY_GOALS, [{"quality": "cost", "rank": 3, "direction": "max"}])
    assert [(g.quality, g.rank, g.direction) for g in merged] == [("loss", 1, None), ("cost", 3, "max")]
    with pytest.raises(ValueError):
        merge_goals(TOY_GOALS, [{"quality": "delay", "rank": 1, "direction": "min"}])


def test_shipped_latency_package():
    pkg = load_package(data_file("packages", "latency.json"))
    assert pkg == latency_package()
    assert pkg.models == (LATENCY,)
    assert Goal.from_dict(pkg.goals[0]).threshold == 5.0


def test_package_loader_errors():
    with pytest.raises(UpdateError):
        load_package({"name": "x", "models": [{"quality": "latency", "implementation": "fpga"}]})
    with pytest.raises(UpdateError):
        load_package({"nmae": "x"})


def test_catalog_has_native_and_dsl_twins():
    for q in ("packetLoss", "energy", "latency"):
        assert MODEL_CATALOG[(q, "native")].kind == MODEL_CATALOG[(q, "dsl")].kind
