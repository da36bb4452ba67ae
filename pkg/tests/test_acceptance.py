"""Acceptance suite: one test per criterion, named test_cNN_<title>.

The conftest prints a PASS/FAIL line per criterion at the end of the run.
"""

import io
import math
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import ks_2samp

from oracles import packet_loss_exact, workflow_failure
from selfadapt.deltaiot import (
    DELTAIOT15,
    Link,
    Mote,
    NetworkSettings,
    Topology,
    UncertaintyState,
    default_settings,
    failsafe_settings,
    link_failure_probability,
    receive_energy_per_cycle,
    send_energy,
)
from selfadapt.engine import parse_model
from selfadapt.evolve import latency_package
from selfadapt.experiment import resolve_scenario, run_adaptive, run_fixed
from selfadapt.healthsvc import DEFAULT_CATALOG, enumerate_combinations, predict_failure_rate
from selfadapt.mape import enumerate_options, write_log
from selfadapt.qmodels import dsl, native, predict_packet_loss
from selfadapt.rng import run_keys, uniform_batch
from selfadapt.smc import estimate_mean, estimate_probability, required_samples, simulate_series
from selfadapt.verify import verify_suite

FAULTY = Path(__file__).parent / "fixtures" / "mape_loop_faulty_planner.anm"
GOAL = 0.10  # packet-loss goal of the network
LATENCY_GOAL = 5.0


def test_c01_sample_count_scaling(record_property):
    coarse, fine = required_samples(0.05, 0.05), required_samples(0.01, 0.05)
    ratio = fine / coarse
    record_property("detail", f"N {fine}/{coarse} = {ratio:.4f}")
    # the unrounded bound ln(2/alpha) / (2 eps^2) scales exactly with 1/eps^2;
    # the run counts are its ceilings, so their ratio is 25.0 to one decimal
    assert (coarse, fine) == (738, 18445)
    bound = lambda eps: math.log(2 / 0.05) / (2 * eps * eps)
    assert bound(0.01) / bound(0.05) == pytest.approx(25.0, rel=1e-12)
    assert round(ratio, 1) == 25.0


def test_c02_confidence_scaling(record_property):
    ratio = required_samples(0.05, 0.01) / required_samples(0.05, 0.05)
    record_property("detail", f"ratio {ratio:.4f}")
    assert 1.40 <= ratio <= 1.50
    # tightening confidence costs far less than tightening accuracy
    assert ratio < required_samples(0.01, 0.05) / required_samples(0.05, 0.05)


def test_c03_rsem_run_count(record_property):
    T = DELTAIOT15
    sampler = native.energy_sampler(T, default_settings(T), UncertaintyState.of(T))
    runs = [estimate_mean(sampler, 0.05, seed).runs for seed in range(50)]
    record_property("detail", f"runs {min(runs)}..{max(runs)}, mean {np.mean(runs):.1f}")
    assert all(15 <= n <= 45 for n in runs), runs


def test_c04_energy_constants(record_property):
    se, re = send_energy(10, 15), receive_energy_per_cycle()
    record_property("detail", f"send {se:.6f} C, receive {re:.6f} C")
    assert abs(se - 0.100362) <= 1e-9
    assert abs(re - 15.904) <= 1e-9


def test_c05_failure_formula(record_property):
    got = [link_failure_probability(snr) for snr in (5, 0, -10, -20, -50)]
    record_property("detail", str(got))
    assert got == [0.0, 0.0, 0.5, 1.0, 1.0]


def test_c06_adaptation_space_size(record_property):
    n_iot = len(enumerate_options(DELTAIOT15, UncertaintyState.of(DELTAIOT15)))
    n_health = len(enumerate_combinations(DEFAULT_CATALOG))
    record_property("detail", f"{n_iot} network options, {n_health} service combinations")
    assert (n_iot, n_health) == (216, 100)


def test_c07_goal_compliance_under_adaptation(record_property):
    res = run_adaptive(90, scenario="drift", seed=2, record=True)
    fixed = run_fixed(90, scenario="drift", seed=2, policy="failsafe")
    # precondition: a compliant option exists in every cycle
    assert all(any(o.results["packetLoss"].hi < GOAL for o in opts) for opts in res.recorder.options)
    loss = np.mean([s.packet_loss for s in res.stats])
    energy = np.mean([s.energy for s in res.stats])
    energy_fs = np.mean([s.energy for s in fixed])
    record_property("detail", f"loss {loss:.4f}, energy {energy:.3f} C vs failsafe {energy_fs:.3f} C")
    assert loss < GOAL
    assert energy <= energy_fs


def test_c08_failsafe_exactly_when_nothing_complies(record_property):
    res = run_adaptive(25, scenario="outage", seed=3, record=True)
    hopeless = {
        d.cycle
        for d, opts in zip(res.decisions, res.recorder.options)
        if d.analyzed and opts and all(o.results["packetLoss"].hi >= GOAL for o in opts)
    }
    flagged = {d.cycle for d in res.decisions if d.failsafe}
    record_property("detail", f"non-compliant cycles {sorted(hopeless)}, failsafe rows {sorted(flagged)}")
    assert hopeless  # the scenario must actually exercise the failsafe
    assert flagged == hopeless


def test_c09_loop_model_properties(record_property):
    results = verify_suite()
    verdicts = {(r.scenario.name, v.prop.name): v.holds for r in results for v in r.verdicts}
    faulty = verify_suite(parse_model(FAULTY.read_text()))
    cex = [v for r in faulty for v in r.verdicts if v.prop.name == "correct" and not v.holds]
    record_property("detail", f"{sum(verdicts.values())}/{len(verdicts)} verdicts hold; faulty planner: {len(cex)} counterexample(s)")
    props = {v.prop.name: v.prop.text for v in results[0].verdicts}
    assert "Probe.AdaptationIncorrect" in props["correct"]
    assert "Analyzer.AdaptationNeeded" in props["needed"]
    assert "Analyzer.NoAdaptationNeeded" in props["not-needed"]
    assert all(r.exploration.complete for r in results)
    assert all(verdicts.values()), verdicts
    assert cex and cex[0].counterexample


def test_c10_goal_evolution(record_property):
    at, cycles = 4, 10
    plain = run_adaptive(cycles, scenario="drift", seed=2)
    res = run_adaptive(cycles, scenario="drift", seed=2, update=latency_package(), update_at=at, record=True)

    def log_bytes(decisions):
        buf = io.StringIO()
        write_log(decisions, buf)
        return buf.getvalue().encode()

    # rows up to and including the cycle after which the update is activated
    assert log_bytes(res.decisions[: at + 1]) == log_bytes(plain.decisions[: at + 1])
    first = res.decisions[at + 1]
    assert first.event == "activate:latency" and "latency" in first.estimates
    assert all("latency" not in d.estimates for d in res.decisions[: at + 1])
    violations = 0
    for d, opts in zip(res.decisions[at + 1 :], res.recorder.options[at + 1 :]):
        compliant = [o for o in opts if o.results["packetLoss"].hi < GOAL and o.results["latency"].hi < LATENCY_GOAL]
        if compliant:
            chosen = next(o for o in opts if o.index == d.chosen)
            violations += chosen.results["latency"].hi >= LATENCY_GOAL
        else:
            assert d.failsafe
    record_property("detail", f"activated after cycle {at}; {violations} post-activation violations")
    assert violations == 0


# -- oracle equivalence -------------------------------------------------------

def _small_net(links, loads, pf):
    motes = tuple(Mote(m, loads[m]) for m in sorted(loads))
    topo = Topology(motes, tuple(Link(a, b, -20.0 * p, 0.0) for (a, b), p in zip(links, pf)))
    return topo, UncertaintyState.of(topo)


SMALL_CASES = [
    # (links, loads, per-link failure at power 0, factors)
    ([(2, 1)], {2: 1.0}, [0.3], (100,)),
    ([(2, 1), (3, 2)], {2: 0.5, 3: 1.0}, [0.1, 0.25], (100, 100)),
    ([(2, 1), (3, 1), (3, 2), (4, 3), (4, 2)], {2: 1.0, 3: 0.5, 4: 1.0}, [0.1, 0.25, 0.05, 0.5, 0.2], (100, 40, 60, 80, 20)),
    ([(2, 1), (3, 1), (3, 2), (4, 3), (4, 2)], {2: 0.3, 3: 1.0, 4: 0.7}, [0.2, 0.4, 0.1, 0.0, 0.5], (100, 0, 100, 60, 40)),
    # failsafe duplication; beta is 0 so its maximum power leaves the rates alone
    ([(2, 1), (3, 1), (3, 2), (4, 3), (4, 2)], {2: 1.0, 3: 1.0, 4: 1.0}, [0.3, 0.4, 0.2, 0.5, 0.1], None),
]


def test_c11_oracle_equivalence(record_property):
    eps, alpha = 0.02, 0.05
    cat = DEFAULT_CATALOG
    worst_health = 0.0
    for k, (m, d, a) in enumerate(enumerate_combinations(cat)):
        exact = float(workflow_failure(cat.failure[0][m], cat.failure[1][d], cat.failure[2][a]))
        est = predict_failure_rate((m, d, a), epsilon=eps, alpha=alpha, seed=k)
        worst_health = max(worst_health, abs(est.point - exact))
    worst_net = 0.0
    for k, (links, loads, pf, factors) in enumerate(SMALL_CASES):
        topo, u = _small_net(links, loads, pf)
        s = failsafe_settings(topo) if factors is None else NetworkSettings((0,) * len(links), factors)
        exact = float(packet_loss_exact(
            [(m.id, l) for m, l in zip(topo.motes, u.loads)],
            [(l.source, l.dest) for l in topo.links],
            topo.gateway,
            [u.failure(i, p) for i, p in enumerate(s.power)],
            s.factors,
        ))
        est = predict_packet_loss(topo, s, u, epsilon=eps, alpha=alpha, seed=k)
        worst_net = max(worst_net, abs(est.point - exact))
    record_property("detail", f"max error: services {worst_health:.4f}, network {worst_net:.4f} (eps {eps})")
    assert worst_health <= eps
    assert worst_net <= eps


# -- engine versus native models ------------------------------------------------

KS_ALPHA = 0.001
KS_N = 1000
# two-sample Kolmogorov-Smirnov critical value for equal sizes n:
# c(a) * sqrt(2 / n) with c(a) = sqrt(-ln(a / 2) / 2); 0.0872 at n = 1000
KS_THRESHOLD = math.sqrt(-math.log(KS_ALPHA / 2) / 2) * math.sqrt(2 / KS_N)


def _ks_conditions():
    T = DELTAIOT15
    lossy = resolve_scenario("outage", T).uncertainty(T, 12)  # inside the outage window
    plain = UncertaintyState.of(T)
    s = default_settings(T)
    return [
        ("packetLoss", native.packet_loss_sampler(T, s, lossy), dsl.packet_loss_sampler(T, s, lossy)),
        ("energy", native.energy_sampler(T, s, plain), dsl.energy_sampler(T, s, plain)),
        ("latency", native.latency_sampler(T, s, plain), dsl.latency_sampler(T, s, plain)),
    ]


def test_c12_engine_native_differential(record_property):
    worst = {}
    for name, nat, eng in _ks_conditions():
        for seed in range(5):
            # both models compute the same quantities with a different order of
            # float sums; rounding keeps equal values tied for the statistic
            a = np.round(simulate_series(nat, KS_N, seed), 9)
            b = np.round(simulate_series(eng, KS_N, 1000 + seed), 9)
            worst[name] = max(worst.get(name, 0.0), ks_2samp(a, b, method="asymp").statistic)
    record_property("detail", ", ".join(f"{q} D={d:.3f}" for q, d in worst.items()) + f" (threshold {KS_THRESHOLD:.4f})")
    assert round(KS_THRESHOLD, 3) == 0.087
    assert all(d < KS_THRESHOLD for d in worst.values()), worst


def _bernoulli(p):
    def sample(seed, indices):
        return (uniform_batch(run_keys(seed, indices), 0) < p).astype(np.float64)

    return sample


def test_c13_smc_interval_coverage(record_property):
    eps, alpha, reps = 0.05, 0.05, 500
    cover = {}
    for p in (0.1, 0.5, 0.9):
        hits = 0
        for seed in range(reps):
            est = estimate_probability(_bernoulli(p), eps, alpha, seed)
            hits += est.lo <= p <= est.hi
        cover[p] = hits / reps
    record_property("detail", ", ".join(f"p={p}: {c:.3f}" for p, c in cover.items()))
    assert all(c >= 1 - alpha - 0.02 for c in cover.values()), cover
