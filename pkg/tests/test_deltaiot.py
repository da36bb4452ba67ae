import json

import pytest
from hypothesis import given, settings, strategies as st

from selfadapt.deltaiot import (
    DELTAIOT15,
    MAX_POWER,
    DeltaIoTSimulator,
    NetworkSettings,
    NetworkState,
    Scenario,
    SettingsError,
    STATS_HEADER,
    TopologyError,
    UncertaintyState,
    clamp_snr,
    default_settings,
    failsafe_settings,
    link_failure_probability,
    load_scenario,
    load_topology,
    min_power_for_link,
    receive_energy_per_cycle,
    run_cycle,
    send_energy,
    uncertainty_from_probe,
)
from selfadapt.experiment import data_file
from selfadapt.mape.iot import enumerate_options
from selfadapt.rng import Stream

T = DELTAIOT15


def test_energy_constants():
    assert send_energy(10, 15) == pytest.approx(0.100362, abs=1e-12)
    assert receive_energy_per_cycle() == pytest.approx(15.904, abs=1e-12)
    assert send_energy(0, 3) == 0.0


def test_send_energy_grows_with_power():
    vals = [send_energy(10, p) for p in range(MAX_POWER + 1)]
    assert vals == sorted(vals) and len(set(vals)) == len(vals)


@pytest.mark.parametrize("snr,p", [(5, 0.0), (0, 0.0), (-10, 0.5), (-20, 1.0), (-50, 1.0), (-4, 0.2)])
def test_failure_probability(snr, p):
    assert link_failure_probability(snr) == pytest.approx(p, abs=1e-15)


@given(st.floats(-1e6, 1e6))
def test_failure_probability_in_unit(snr):
    assert 0.0 <= link_failure_probability(snr) <= 1.0
    assert -50 <= clamp_snr(snr) <= 50


def test_default_topology_shape():
    assert len(T.motes) == 14 and len(T.links) == 17
    assert len(T.two_parent_motes) == 3
    assert T.turn_order == (8, 10, 13, 14, 15, 5, 6, 11, 12, 9, 7, 2, 3, 4)


@pytest.mark.parametrize(
    "spec,msg",
    [
        ({"motes": [{"id": 2}], "links": [[2, 2, 0, 1]]}, "self loop"),
        ({"motes": [{"id": 2}, {"id": 3}], "links": [[2, 3, 0, 1], [3, 2, 0, 1]]}, "cycle"),
        ({"motes": [{"id": 2}, {"id": 3}], "links": [[2, 1, 0, 1]]}, "unreachable"),
        ({"motes": [{"id": 2}], "links": [[2, 9, 0, 1]]}, "unknown destination"),
        ({"motes": [{"id": 2, "load": 2.0}], "links": [[2, 1, 0, 1]]}, "load"),
        ({"motes": [{"id": 2}, {"id": 2}], "links": []}, "duplicate"),
        ({"motes": [{"id": 2}]}, "malformed"),
    ],
)
def test_topology_validation(spec, msg):
    with pytest.raises(TopologyError, match=msg):
        load_topology(spec)


def test_topology_dict_round_trip():
    assert load_topology(T.to_dict()) == T


def test_settings_validation():
    s = default_settings(T)
    s.validate(T)
    failsafe_settings(T).validate(T)
    with pytest.raises(SettingsError):
        NetworkSettings(s.power[:-1], s.factors[:-1]).validate(T)
    with pytest.raises(SettingsError):
        NetworkSettings((16,) + s.power[1:], s.factors).validate(T)
    with pytest.raises(SettingsError):
        NetworkSettings(s.power, (30,) + s.factors[1:]).validate(T)
    links = T.parent_links[T.two_parent_motes[0]]
    f = list(s.factors)
    f[links[0]], f[links[1]] = 60, 60
    with pytest.raises(SettingsError, match="sum to 100"):
        NetworkSettings(s.power, tuple(f)).validate(T)


def test_min_power_is_minimal():
    u = UncertaintyState.of(T)
    for i in range(len(T.links)):
        p = min_power_for_link(i, u)
        if u.snr(i, p) >= 0:
            assert p == 0 or u.snr(i, p - 1) < 0
        else:
            assert p == MAX_POWER


@given(st.integers(0, 10_000), st.sampled_from(["default", "failsafe", "option"]), st.integers(0, 215))
@settings(max_examples=25, deadline=None)
def test_packets_are_conserved(seed, which, k):
    u = UncertaintyState.of(T)
    s = {"default": default_settings(T), "failsafe": failsafe_settings(T)}.get(which) or enumerate_options(T, u)[k]
    state = NetworkState()
    rng = Stream.from_seed(seed)
    for c in range(3):
        stats, state = run_cycle(T, s, u, rng, state, c)
        assert stats.carried_in + stats.generated == stats.delivered + stats.dropped + stats.carried_out
        assert 0.0 <= stats.packet_loss <= 1.0


def test_failsafe_costs_more_energy():
    u = UncertaintyState.of(T)
    a, _ = run_cycle(T, default_settings(T), u, Stream(1))
    b, _ = run_cycle(T, failsafe_settings(T), u, Stream(1))
    assert b.send_energy > a.send_energy


def test_simulator_reproducible_and_settings_delayed():
    sim = DeltaIoTSimulator(T, seed=4)
    sim2 = DeltaIoTSimulator(T, seed=4)
    first = sim.run_cycle()
    assert first == sim2.run_cycle()
    sim.apply_settings(failsafe_settings(T))
    assert sim.settings == default_settings(T)
    sim.run_cycle()
    assert sim.settings.is_failsafe


def test_probe_before_cycle_raises():
    with pytest.raises(RuntimeError):
        DeltaIoTSimulator(T).probe()


def test_probe_recovers_uncertainty():
    sim = DeltaIoTSimulator(T, load_scenario(data_file("scenarios", "drift.json"), T), seed=2)
    sim.run_cycle()
    conf = sim.probe()
    u = uncertainty_from_probe(T, conf)
    want = sim.scenario.uncertainty(T, 0)
    assert u.alpha == pytest.approx(want.alpha)
    assert u.loads == want.loads


def test_scenario_events_and_round_trip():
    sc = load_scenario(
        {"seed": 3, "events": [{"from": 2, "to": 4, "links": [[2, 4]], "deltaAlpha": -10}]}, T
    )
    li = T.link_index(2, 4)
    base = sc.uncertainty(T, 1).alpha[li]
    assert sc.uncertainty(T, 2).alpha[li] == pytest.approx(base - 10)
    assert sc.uncertainty(T, 4).alpha[li] == pytest.approx(base)
    again = load_scenario(json.loads(json.dumps(sc.to_dict(T))), T)
    assert again == sc


def test_scenario_rejects_unknown_fields():
    with pytest.raises(ValueError):
        load_scenario({"sead": 1}, T)


@given(st.integers(0, 100), st.integers(0, 10**6))
def test_scenario_uncertainty_is_pure(cycle, seed):
    sc = Scenario(seed=seed, amplitude=3, noise=1, load_jitter=0.1)
    a, b = sc.uncertainty(T, cycle), sc.uncertainty(T, cycle)
    assert a == b
    assert all(0.0 <= x <= 1.0 for x in a.loads)


def test_stats_header_golden():
    assert STATS_HEADER == ("cycle", "packetLoss", "energy", "latencyPct", "settingsHash")
