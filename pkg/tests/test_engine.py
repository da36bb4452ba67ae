from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from selfadapt.engine import (
    EngineError,
    ModelError,
    eval_expr,
    format_expr,
    format_model,
    initial_state,
    parse_expr,
    parse_model,
    simulate,
    step,
    successors,
)
from selfadapt.deltaiot import DELTAIOT15, UncertaintyState, default_settings
from selfadapt.qmodels.dsl import MODEL_FILES, bind, model_source
from selfadapt.rng import Stream

PINGPONG = """
int[0,100] n = 0;
chan ping, pong;
automaton A {
    loc Idle initial;
    loc Sent;
    edge Idle -> Sent { sync: ping!; update: n = (n + 1) % 50; }
    edge Sent -> Idle { sync: pong?; }
}
automaton B {
    loc Wait initial;
    loc Got;
    edge Wait -> Got { sync: ping?; update: n = (n + 10) % 50; }
    edge Got -> Wait { sync: pong!; }
}
"""


def loc(net, s, aut):
    return s.location(net, aut)


# -- expressions ------------------------------------------------------------

@pytest.mark.parametrize(
    "text,value",
    [
        ("7 / 2", 3),
        ("-7 / 2", -3),
        ("-7 % 3", -1),
        ("7.0 / 2", 3.5),
        ("1 + 2 * 3", 7),
        ("(1 + 2) * 3", 9),
        ("2 < 3 && 3 < 2", False),
        ("true ? 4 : 5", 4),
        ("!(1 == 1) || 2 >= 2", True),
    ],
)
def test_expression_values(text, value):
    assert eval_expr(parse_expr(text)) == value


@given(st.integers(-1000, 1000), st.integers(-1000, 1000).filter(lambda b: b != 0))
def test_integer_division_truncates(a, b):
    q = eval_expr(parse_expr(f"({a}) / ({b})"))
    r = eval_expr(parse_expr(f"({a}) % ({b})"))
    assert q == int(a / b)
    assert q * b + r == a


@given(st.integers(0, 50), st.integers(0, 50), st.integers(1, 50))
def test_format_expr_round_trip(a, b, c):
    e = parse_expr(f"({a} + {b}) * {c} - {a} / {c} > {b} ? {a} : -{c}")
    assert eval_expr(parse_expr(format_expr(e))) == eval_expr(e)


def test_constant_division_by_zero_is_a_model_error():
    with pytest.raises(ModelError):
        parse_expr("1 / 0")


# -- parsing ----------------------------------------------------------------

def test_undeclared_location_reports_position():
    with pytest.raises(ModelError) as err:
        parse_model("int x = 0;\nautomaton A { loc S initial; edge S -> T { } }")
    assert err.value.line == 2 and "T" in str(err.value)


@pytest.mark.parametrize(
    "src",
    [
        "automaton A { loc S; }",  # no initial location
        "automaton A { loc S initial; loc S; }",
        "int x; int x; automaton A { loc S initial; }",
        "automaton A { loc S initial; edge S -> S { sync: c!; } }",
        "automaton A { loc S initial; edge S -> S { weight: -1; } }",
        "int x = 0;",
    ],
)
def test_invalid_models_rejected(src):
    with pytest.raises(ModelError):
        parse_model(src)


@pytest.mark.parametrize("quality", sorted(MODEL_FILES))
def test_shipped_models_round_trip_through_printer(quality):
    net = parse_model(model_source(MODEL_FILES[quality]))
    again = parse_model(format_model(net))
    assert format_model(again) == format_model(net)


# -- semantics --------------------------------------------------------------

def test_binary_sync_runs_sender_update_first():
    net = parse_model(PINGPONG)
    s, fired = step(net, initial_state(net), Stream(1))
    assert len(fired) == 2
    assert s.get(net, "n") == 11
    assert loc(net, s, "A") == "Sent" and loc(net, s, "B") == "Got"


def test_time_ticks_when_nothing_enabled():
    net = parse_model("chan c;\nautomaton A { loc S initial; edge S -> S { sync: c!; } }")
    s, fired = step(net, initial_state(net), Stream(0))
    assert fired == () and s.ticks == 1


def test_broadcast_reaches_every_listener_and_never_blocks():
    net = parse_model("""
    int[0,10] got = 0;
    broadcast chan b;
    automaton S { loc A initial; loc B; edge A -> B { sync: b!; } }
    automaton R1 { loc A initial; loc B; edge A -> B { sync: b?; update: got = got + 1; } }
    automaton R2 { loc A initial; loc B; edge A -> B { sync: b?; update: got = got + 1; } }
    automaton R3 { loc A initial; loc B; edge A -> B { guard: false; sync: b?; update: got = got + 5; } }
    """)
    s, fired = step(net, initial_state(net), Stream(0))
    assert s.get(net, "got") == 2
    assert loc(net, s, "R3") == "A"
    assert len(fired) == 3


def test_committed_location_has_priority():
    net = parse_model("""
    int[0,10] order = 0;
    automaton C { loc A initial committed; loc B; edge A -> B { update: order = order * 2 + 1; } }
    automaton D { loc A initial; loc B; edge A -> B { update: order = order * 2; } }
    """)
    for seed in range(20):
        s, _ = step(net, initial_state(net), Stream(seed))
        assert loc(net, s, "C") == "B" and loc(net, s, "D") == "A"


def test_receiver_guard_sees_pre_state():
    net = parse_model("""
    int[0,10] x = 0;
    chan c;
    automaton S { loc A initial; loc B; edge A -> B { sync: c!; update: x = 5; } }
    automaton R { loc A initial; loc B; edge A -> B { guard: x == 0; sync: c?; } }
    """)
    s, fired = step(net, initial_state(net), Stream(0))
    assert len(fired) == 2 and s.get(net, "x") == 5


def test_weighted_branch_frequencies():
    net = parse_model("""
    int[0,2] pick = 0;
    automaton A {
        loc S initial; loc T;
        edge S -> T { weight: 1; update: pick = 1; }
        edge S -> T { weight: 3; update: pick = 2; }
    }
    """)
    c = Counter(simulate(net, 1, seed=i).final.get(net, "pick") for i in range(4000))
    assert abs(c[2] / 4000 - 0.75) < 0.03


def test_zero_weight_branch_never_taken():
    net = parse_model("""
    int[0,2] pick = 0;
    automaton A {
        loc S initial; loc T;
        edge S -> T { weight: 0; update: pick = 1; }
        edge S -> T { weight: 2; update: pick = 2; }
    }
    """)
    assert all(simulate(net, 1, seed=i).final.get(net, "pick") == 2 for i in range(200))
    assert len(successors(net, initial_state(net))) == 1


def test_all_zero_weights_is_an_error():
    net = parse_model("""
    int[0,1] w = 0;
    automaton A { loc S initial; loc T; edge S -> T { weight: w; } edge S -> T { weight: w; } }
    """)
    with pytest.raises(EngineError):
        step(net, initial_state(net), Stream(0))


def test_bound_violation_raises():
    net = parse_model("int[0,3] x = 0;\nautomaton A { loc S initial; edge S -> S { update: x = x + 1; } }")
    with pytest.raises(EngineError, match="bound"):
        simulate(net, 10)


def test_deterministic_model_consumes_no_randomness():
    net = parse_model(PINGPONG)
    rng = Stream(3)
    s = initial_state(net)
    for _ in range(6):
        s, _ = step(net, s, rng)
    assert rng.counter == 0


def test_simulate_stop_predicate_and_reproducibility():
    net = parse_model(PINGPONG)
    tr = simulate(net, 100, "B.Got", seed=4)
    assert tr.stopped and tr.steps == 1
    a = simulate(net, 50, seed=9)
    b = simulate(net, 50, seed=9)
    assert a.states == b.states


def test_successors_enumerate_every_branch():
    net = parse_model("""
    int[0,3] pick = 0;
    automaton A {
        loc S initial; loc T;
        edge S -> T { weight: 1; update: pick = 1; }
        edge S -> T { weight: 1; update: pick = 2; }
        edge S -> T { update: pick = 3; }
    }
    """)
    got = sorted(n.get(net, "pick") for _, n in successors(net, initial_state(net)))
    assert got == [1, 2, 3]


@given(st.integers(0, 2**32))
@settings(max_examples=30, deadline=None)
def test_step_result_is_among_successors(seed):
    topo = DELTAIOT15
    net = bind("packetLoss", topo, default_settings(topo), UncertaintyState.of(topo))
    s = initial_state(net)
    nxt, _ = step(net, s, Stream(seed))
    assert nxt.key() in {n.key() for _, n in successors(net, s)}
