"""Discrete-time execution of automaton networks.

One call to :func:`step` fires exactly one transition, or advances time by
one tick when nothing is enabled. Transitions are

* an internal edge group of one automaton,
* a send group paired with a receive group of another automaton (binary
  channel),
* a send group plus one enabled receive group from every other automaton
  that has one (broadcast channel; each receiver picks uniformly among its
  own enabled groups).

When any automaton sits in a committed location, only transitions started
(internal or sending edge) from a committed location are eligible. The
transition is chosen uniformly; inside a weighted branch group the edge is
chosen proportionally to its weight. No random number is drawn for a choice
with a single alternative, so deterministic models consume no randomness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

from ..rng import Stream
from .ast import AutomatonNetwork
from .compile import EngineError, Program, Resolver, compile_expr


@dataclass(frozen=True)
class NetState:
    locations: tuple[int, ...]
    values: tuple  # one entry per non-constant variable; arrays are tuples
    ticks: int = 0

    def get(self, net: AutomatonNetwork, name: str):
        prog = net.program
        if name in prog.consts:
            return prog.consts[name]
        return self.values[prog.slot(name)]

    def location(self, net: AutomatonNetwork, automaton: str) -> str:
        i = net.automaton_index(automaton)
        return net.automata[i].locations[self.locations[i]].name

    def key(self) -> tuple:
        """State identity for exploration (time is not part of it)."""
        return (self.locations, self.values)


def initial_state(net: AutomatonNetwork) -> NetState:
    prog = net.program
    return NetState(prog.initial_locations, prog.initial_values, 0)


# A transition is (initiator automaton, group, [(receiver automaton, [groups])]).
# For binary sync the receiver list has one entry with one group.


def _enabled(prog: Program, state: NetState) -> list:
    g = state.values
    locs = state.locations
    per_aut = []
    for ai, li in enumerate(locs):
        per_aut.append([grp for grp in prog.groups[ai][li] if grp.guard is None or grp.guard(g, None)])

    committed_any = any(prog.committed[ai][li] for ai, li in enumerate(locs))
    out = []
    for ai, groups in enumerate(per_aut):
        if committed_any and not prog.committed[ai][locs[ai]]:
            continue
        for grp in groups:
            if grp.send is None:
                out.append((ai, grp, ()))
            elif grp.send:
                ch = grp.channel
                if prog.broadcast[ch]:
                    recv = []
                    for bj, other in enumerate(per_aut):
                        if bj == ai:
                            continue
                        mine = [h for h in other if h.send is False and h.channel == ch]
                        if mine:
                            recv.append((bj, mine))
                    out.append((ai, grp, tuple(recv)))
                else:
                    for bj, other in enumerate(per_aut):
                        if bj == ai:
                            continue
                        for h in other:
                            if h.send is False and h.channel == ch:
                                out.append((ai, grp, ((bj, [h]),)))
    return out


def _weights(grp, g) -> list[int]:
    ws = []
    for _, _, wfn, _ in grp.edges:
        w = wfn(g, None)
        if w.__class__ is not int or w < 0:
            raise EngineError(f"branch weight must be a nonnegative int, got {w!r}")
        ws.append(w)
    if sum(ws) <= 0:
        raise EngineError("branch group weights sum to zero")
    return ws


def _pick_edge(grp, g, rng: Stream):
    edges = grp.edges
    if edges[0][2] is None:
        return edges[0]
    ws = _weights(grp, g)
    if len(edges) == 1:
        return edges[0]
    r = rng.randbelow(sum(ws))
    for e, w in zip(edges, ws):
        if r < w:
            return e
        r -= w
    raise AssertionError("unreachable")


def _fire(prog: Program, state: NetState, parts) -> tuple[NetState, tuple]:
    """Apply chosen edges ``[(automaton, edge_entry), ...]`` in order."""
    g = list(state.values)
    locs = list(state.locations)
    fired = []
    for ai, (ei, target, _, upd) in parts:
        if upd is not None:
            upd(g, None)
        locs[ai] = target
        fired.append((ai, ei))
    return NetState(tuple(locs), tuple(g), state.ticks), tuple(fired)


def step(net: AutomatonNetwork, state: NetState, rng: Stream) -> tuple[NetState, tuple]:
    """Fire one transition. Returns the new state and ``((automaton, edge), ...)``.

    The report is empty when time ticked because nothing was enabled.
    """
    prog = net.program
    trans = _enabled(prog, state)
    if not trans:
        return NetState(state.locations, state.values, state.ticks + 1), ()
    t = trans[0] if len(trans) == 1 else trans[rng.randbelow(len(trans))]
    ai, grp, receivers = t
    g = state.values
    parts = [(ai, _pick_edge(grp, g, rng))]
    for bj, groups in receivers:
        h = groups[0] if len(groups) == 1 else groups[rng.randbelow(len(groups))]
        parts.append((bj, _pick_edge(h, g, rng)))
    return _fire(prog, state, parts)


def _branches(grp, g) -> list:
    if grp.edges[0][2] is None:
        return [grp.edges[0]]
    ws = _weights(grp, g)
    return [e for e, w in zip(grp.edges, ws) if w > 0]


def successors(net: AutomatonNetwork, state: NetState) -> list[tuple[tuple, NetState]]:
    """Every state one step can lead to, treating probabilities as choices.

    A state with nothing enabled has the single tick successor with report ().
    """
    prog = net.program
    trans = _enabled(prog, state)
    if not trans:
        return [((), NetState(state.locations, state.values, state.ticks + 1))]
    g = state.values
    out = []
    for ai, grp, receivers in trans:
        combos = [[(ai, e)] for e in _branches(grp, g)]
        for bj, groups in receivers:
            options = [(bj, e) for h in groups for e in _branches(h, g)]
            combos = [c + [o] for c in combos for o in options]
        for parts in combos:
            nxt, fired = _fire(prog, state, parts)
            out.append((fired, nxt))
    return out


# -- predicates -------------------------------------------------------------

class _PredResolver(Resolver):
    def __init__(self, net: AutomatonNetwork):
        self.prog = net.program
        self.net = net

    def const_value(self, name):
        return self.prog.consts.get(name)

    def var(self, name):
        if name not in self.prog.slots:
            raise EngineError(f"undeclared identifier {name!r}")
        i = self.prog.slot(name)
        return lambda g, l: g[i]

    def array(self, name):
        return self.var(name)

    def func(self, name):
        return self.prog.resolver.func(name)

    def loc(self, automaton, location):
        ai = self.net.automaton_index(automaton)
        li = self.net.automata[ai].location_index(location)
        return lambda g, l: 1 if l[ai] == li else 0


def compile_value(net: AutomatonNetwork, expr) -> Callable[[NetState], object]:
    """Turn an expression over a state (text or parsed) into ``fn(state) -> value``."""
    if isinstance(expr, str):
        from .parser import parse_predicate

        expr = parse_predicate(expr, net)
    fn = compile_expr(expr, _PredResolver(net))
    return lambda s: fn(s.values, s.locations)


def compile_predicate(net: AutomatonNetwork, pred) -> Callable[[NetState], bool]:
    """Turn a predicate (text or parsed expression) into ``fn(state) -> bool``."""
    fn = compile_value(net, pred)
    return lambda s: bool(fn(s))


# -- simulation -------------------------------------------------------------

@dataclass
class Trace:
    states: list[NetState]
    fired: list[tuple] = field(default_factory=list)
    steps: int = 0
    stopped: bool = False  # True when the stop predicate ended the run

    @property
    def final(self) -> NetState:
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.states)


def simulate(
    net: AutomatonNetwork,
    horizon: int,
    stop=None,
    rng: Optional[Stream] = None,
    *,
    seed: Optional[int] = None,
    record: bool = True,
    state: Optional[NetState] = None,
) -> Trace:
    """Run up to ``horizon`` steps, ending early once ``stop`` holds.

    ``stop`` may be a callable on :class:`NetState`, predicate text or a
    parsed predicate. With ``record=False`` only the final state is kept.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if rng is None:
        rng = Stream.from_seed(0 if seed is None else seed)
    if stop is not None and not callable(stop):
        stop = compile_predicate(net, stop)
    s = initial_state(net) if state is None else state
    states = [s]
    fired: list[tuple] = []
    n = 0
    stopped = stop is not None and stop(s)
    while not stopped and n < horizon:
        s, f = step(net, s, rng)
        n += 1
        if record:
            states.append(s)
            fired.append(f)
        stopped = stop is not None and stop(s)
    if not record:
        states = [s]
    return Trace(states, fired, n, stopped)


def run_many(net: AutomatonNetwork, horizon: int, stop, streams: Sequence[Stream]) -> Iterator[NetState]:
    """Final states of independent runs, one per stream."""
    if stop is not None and not callable(stop):
        stop = compile_predicate(net, stop)
    for rng in streams:
        yield simulate(net, horizon, stop, rng, record=False).final
