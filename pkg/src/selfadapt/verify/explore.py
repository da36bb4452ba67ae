"""Bounded breadth-first exploration with safety and bounded-response checks.

Probabilistic branches count as nondeterministic choices, which
over-approximates the behaviour of the stochastic model.
"""

from __future__ import annotations

import os
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from ..engine import AutomatonNetwork, NetState, compile_predicate, initial_state, successors

DEFAULT_MAX_STATES = 1_000_000
DEFAULT_DEPTH = 10_000


class ExplorationBudgetExceeded(RuntimeError):
    def __init__(self, states: int):
        super().__init__(f"state-space budget exceeded after {states} states")
        self.states = states


@dataclass(frozen=True)
class Property:
    kind: str  # 'never-reach' | 'leads-to'
    predicate: str  # never-reach: bad states; leads-to: premise
    conclusion: str = ""
    bound: int = 0
    name: str = ""

    @property
    def text(self) -> str:
        if self.kind == "never-reach":
            return f"never-reach: {self.predicate}"
        return f"leads-to[{self.bound}]: {self.predicate} ~> {self.conclusion}"


_LEADS = re.compile(r"leads-to\[(\d+)\]\s*:(.*)~>(.*)$")


def parse_property(line: str, name: str = "") -> Property:
    line = line.strip()
    if line.startswith("never-reach:"):
        pred = line[len("never-reach:"):].strip()
        if not pred:
            raise ValueError("never-reach needs a predicate")
        return Property("never-reach", pred, name=name)
    m = _LEADS.match(line)
    if m:
        bound = int(m.group(1))
        if bound < 1:
            raise ValueError("leads-to bound must be >= 1")
        return Property("leads-to", m.group(2).strip(), m.group(3).strip(), bound, name)
    raise ValueError(f"cannot parse property {line!r}")


def load_properties(path_or_text) -> list[Property]:
    """One property per line; ``#`` starts a comment, ``name = `` prefixes are optional."""
    text = str(path_or_text)
    if os.path.isfile(text):
        with open(text, encoding="utf-8") as fh:
            text = fh.read()
    props = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name = ""
        if "=" in line.split(":", 1)[0]:
            name, line = (x.strip() for x in line.split("=", 1))
        props.append(parse_property(line, name or f"p{len(props) + 1}"))
    return props


@dataclass
class Exploration:
    net: AutomatonNetwork
    states: dict  # key -> NetState
    parent: dict  # key -> (parent key, fired) ; initial -> None
    edges: dict  # key -> list of successor keys
    fired: set  # (automaton, edge) pairs seen
    depth_reached: int
    complete: bool  # frontier exhausted within the depth bound

    @property
    def initial_key(self):
        return initial_state(self.net).key()

    def path_to(self, key) -> list[tuple[tuple, NetState]]:
        out = []
        while self.parent[key] is not None:
            prev, f = self.parent[key]
            out.append((f, self.states[key]))
            key = prev
        out.append(((), self.states[key]))
        return out[::-1]


def explore_states(net: AutomatonNetwork, depth: int = DEFAULT_DEPTH, max_states: int = DEFAULT_MAX_STATES) -> Exploration:
    s0 = initial_state(net)
    k0 = s0.key()
    states = {k0: s0}
    parent = {k0: None}
    edges: dict = {}
    fired: set = set()
    frontier = deque([(k0, 0)])
    deepest = 0
    complete = True
    while frontier:
        key, d = frontier.popleft()
        deepest = max(deepest, d)
        if d >= depth:
            complete = False
            continue
        out = []
        for f, nxt in successors(net, states[key]):
            fired.update(f)
            nk = nxt.key()
            out.append(nk)
            if nk not in states:
                if len(states) >= max_states:
                    raise ExplorationBudgetExceeded(len(states))
                states[nk] = NetState(nxt.locations, nxt.values, 0)
                parent[nk] = (key, f)
                frontier.append((nk, d + 1))
        edges[key] = out
    return Exploration(net, states, parent, edges, fired, deepest, complete)


@dataclass
class Verdict:
    prop: Property
    holds: bool
    counterexample: Optional[list] = None  # [(fired, NetState)]
    note: str = ""


def _check_never(ex: Exploration, prop: Property) -> Verdict:
    bad = compile_predicate(ex.net, prop.predicate)
    # states were inserted in BFS order, so the first hit has a shortest path
    for key, st in ex.states.items():
        if bad(st):
            return Verdict(prop, False, ex.path_to(key))
    return Verdict(prop, True, note="" if ex.complete else "depth bound reached")


def _check_leads_to(ex: Exploration, prop: Property) -> Verdict:
    premise = compile_predicate(ex.net, prop.predicate)
    concl = compile_predicate(ex.net, prop.conclusion)
    good = {k for k, s in ex.states.items() if concl(s)}
    # avoid[j]: states with a j-step path that never visits a conclusion state
    # (states at the depth frontier have unknown successors and count as avoiding)
    avoid = {k for k in ex.states if k not in good}
    layers = [avoid]
    for _ in range(prop.bound):
        prev = layers[-1]
        layers.append({k for k in prev if k not in ex.edges or any(n in prev for n in ex.edges[k])})
    last = layers[-1]
    for key, st in ex.states.items():
        if key in last and premise(st):
            path = ex.path_to(key)
            cur = key
            for j in range(prop.bound, 0, -1):
                if cur not in ex.edges:
                    break
                nxt = next(n for n in ex.edges[cur] if n in layers[j - 1])
                f = next(f for f, s in successors(ex.net, ex.states[cur]) if s.key() == nxt)
                path.append((f, ex.states[nxt]))
                cur = nxt
            return Verdict(prop, False, path)
    return Verdict(prop, True, note="" if ex.complete else "depth bound reached")


def check(ex: Exploration, prop: Property) -> Verdict:
    if prop.kind == "never-reach":
        return _check_never(ex, prop)
    return _check_leads_to(ex, prop)


def explore(net: AutomatonNetwork, properties, depth: int = DEFAULT_DEPTH, max_states: int = DEFAULT_MAX_STATES):
    """Explore ``net`` and check every property; returns (exploration, verdicts)."""
    ex = explore_states(net, depth, max_states)
    return ex, [check(ex, p) for p in properties]


@dataclass
class Coverage:
    automaton: str
    locations_visited: int
    locations_total: int
    edges_fired: int
    edges_total: int
    missing_locations: tuple = field(default_factory=tuple)

    @property
    def location_pct(self) -> float:
        return 100.0 * self.locations_visited / self.locations_total

    @property
    def edge_pct(self) -> float:
        return 100.0 * self.edges_fired / self.edges_total if self.edges_total else 100.0


def coverage_report(explorations, automata=None) -> list[Coverage]:
    """Per-automaton location and edge coverage, merged over explorations."""
    if isinstance(explorations, Exploration):
        explorations = [explorations]
    net = explorations[0].net
    seen_locs = [set() for _ in net.automata]
    seen_edges = set()
    for ex in explorations:
        for st in ex.states.values():
            for ai, li in enumerate(st.locations):
                seen_locs[ai].add(li)
        seen_edges |= ex.fired
    out = []
    for ai, a in enumerate(net.automata):
        if automata is not None and a.name not in automata:
            continue
        fired = sum(1 for ei in range(len(a.edges)) if (ai, ei) in seen_edges)
        missing = tuple(l.name for li, l in enumerate(a.locations) if li not in seen_locs[ai])
        out.append(Coverage(a.name, len(seen_locs[ai]), len(a.locations), fired, len(a.edges), missing))
    return out


def describe_edge(net: AutomatonNetwork, ai: int, ei: int) -> str:
    a = net.automata[ai]
    e = a.edges[ei]
    return f"{a.name}: {e.source} -> {e.target}"


def format_trace(net: AutomatonNetwork, trace, variables=()) -> list[str]:
    """Step-by-step text of a counterexample."""
    lines = []
    prev = None
    for i, (fired, st) in enumerate(trace):
        locs = ", ".join(f"{a.name}.{a.locations[li].name}" for a, li in zip(net.automata, st.locations))
        what = "; ".join(describe_edge(net, ai, ei) for ai, ei in fired) or ("initial" if i == 0 else "tick")
        lines.append(f"step {i}: {what}")
        lines.append(f"  at {locs}")
        changed = []
        for name in variables:
            v = st.get(net, name)
            if prev is None or prev.get(net, name) != v:
                changed.append(f"{name}={v}")
        if changed:
            lines.append("  " + " ".join(changed))
        prev = st
    return lines
