"""Compilation of syntax trees into Python closures.

Every expression becomes ``fn(g, l) -> value`` where ``g`` is the global
variable store (a list indexed by slot) and ``l`` the local frame of the
enclosing helper function (``None`` outside functions). Ints stay Python
``int`` and reals stay ``float``; ``/`` and ``%`` on two ints follow C
truncation semantics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from .ast import (
    Assign,
    AutomatonNetwork,
    Binary,
    Block,
    Call,
    Cond,
    For,
    If,
    Index,
    IntLit,
    LocalDecl,
    LocRef,
    RealLit,
    Return,
    Unary,
    Var,
    VarDecl,
)


class EngineError(RuntimeError):
    """Runtime failure while evaluating or executing a model."""


def cdiv(a, b):
    if b == 0:
        raise EngineError("division by zero")
    if isinstance(a, int) and isinstance(b, int):
        q = abs(a) // abs(b)
        return q if (a >= 0) == (b >= 0) else -q
    return a / b


def cmod(a, b):
    if b == 0:
        raise EngineError("modulo by zero")
    if isinstance(a, int) and isinstance(b, int):
        return a - b * cdiv(a, b)
    return math.fmod(a, b)


def _round(x):
    return int(math.floor(x + 0.5))


BUILTINS: dict[str, tuple[int, Callable]] = {
    "floor": (1, lambda x: int(math.floor(x))),
    "ceil": (1, lambda x: int(math.ceil(x))),
    "round": (1, _round),
    "abs": (1, abs),
    "min": (2, min),
    "max": (2, max),
}

_BINOPS: dict[str, Callable] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": cdiv,
    "%": cmod,
    "<": lambda a, b: 1 if a < b else 0,
    "<=": lambda a, b: 1 if a <= b else 0,
    ">": lambda a, b: 1 if a > b else 0,
    ">=": lambda a, b: 1 if a >= b else 0,
    "==": lambda a, b: 1 if a == b else 0,
    "!=": lambda a, b: 1 if a != b else 0,
}


class Resolver:
    """Maps names to accessors; subclasses decide where values live."""

    def var(self, name: str) -> Callable:
        raise EngineError(f"undeclared identifier {name!r}")

    def array(self, name: str) -> Callable:
        raise EngineError(f"undeclared array {name!r}")

    def func(self, name: str) -> Callable:
        raise EngineError(f"undeclared function {name!r}")

    def loc(self, automaton: str, location: str) -> Callable:
        raise EngineError("location references are only valid in predicates")

    def const_value(self, name: str):
        return None


def _index_getter(arr: Callable, idx: Callable, name: str) -> Callable:
    def get(g, l):
        a = arr(g, l)
        i = idx(g, l)
        if not isinstance(i, int) or i < 0 or i >= len(a):
            raise EngineError(f"index {i} out of range for {name}[{len(a)}]")
        return a[i]

    return get


def compile_expr(e, r: Resolver) -> Callable:
    t = type(e)
    if t is IntLit or t is RealLit:
        v = e.value
        return lambda g, l: v
    if t is Var:
        c = r.const_value(e.name)
        if c is not None:
            return lambda g, l: c
        return r.var(e.name)
    if t is Index:
        return _index_getter(r.array(e.name), compile_expr(e.index, r), e.name)
    if t is Unary:
        f = compile_expr(e.operand, r)
        if e.op == "-":
            return lambda g, l: -f(g, l)
        if e.op == "+":
            return f
        return lambda g, l: 0 if f(g, l) else 1
    if t is Binary:
        a = compile_expr(e.left, r)
        b = compile_expr(e.right, r)
        if e.op == "&&":
            return lambda g, l: 1 if (a(g, l) and b(g, l)) else 0
        if e.op == "||":
            return lambda g, l: 1 if (a(g, l) or b(g, l)) else 0
        if e.op == "+":
            return lambda g, l: a(g, l) + b(g, l)
        if e.op == "-":
            return lambda g, l: a(g, l) - b(g, l)
        if e.op == "*":
            return lambda g, l: a(g, l) * b(g, l)
        if e.op == "==":
            return lambda g, l: 1 if a(g, l) == b(g, l) else 0
        op = _BINOPS[e.op]
        return lambda g, l: op(a(g, l), b(g, l))
    if t is Cond:
        c = compile_expr(e.test, r)
        x = compile_expr(e.then, r)
        y = compile_expr(e.other, r)
        return lambda g, l: x(g, l) if c(g, l) else y(g, l)
    if t is Call:
        args = [compile_expr(a, r) for a in e.args]
        if e.func in BUILTINS:
            fn = BUILTINS[e.func][1]
        else:
            fn = r.func(e.func)
            # user functions receive the global store as first argument
            if len(args) == 1:
                a0 = args[0]
                return lambda g, l: fn(g, (a0(g, l),))
            return lambda g, l: fn(g, tuple(a(g, l) for a in args))
        if len(args) == 1:
            a0 = args[0]
            return lambda g, l: fn(a0(g, l))
        return lambda g, l: fn(*(a(g, l) for a in args))
    if t is LocRef:
        return r.loc(e.automaton, e.location)
    raise EngineError(f"cannot compile {e!r}")


# -- standalone evaluation --------------------------------------------------

class _DictResolver(Resolver):
    def __init__(self, store: dict):
        self.store = store

    def var(self, name):
        store = self.store
        if name not in store:
            raise EngineError(f"undeclared identifier {name!r}")
        return lambda g, l: store[name]

    def array(self, name):
        return self.var(name)


def eval_expr(expr, store: Optional[dict] = None):
    """Evaluate an expression against a plain ``{name: value}`` store.

    Array values are sequences. Raises :class:`EngineError` on division by
    zero, an out-of-range index or a missing variable.
    """
    return compile_expr(expr, _DictResolver(dict(store or {})))(None, None)


# -- helper functions -------------------------------------------------------

class _FuncResolver(Resolver):
    def __init__(self, outer: Resolver, local_slots: dict[str, int]):
        self.outer = outer
        self.local_slots = local_slots

    def var(self, name):
        if name in self.local_slots:
            i = self.local_slots[name]
            return lambda g, l: l[i]
        return self.outer.var(name)

    def array(self, name):
        return self.outer.array(name)

    def func(self, name):
        return self.outer.func(name)

    def const_value(self, name):
        if name in self.local_slots:
            return None
        return self.outer.const_value(name)


_RETURN = object()


def _coerce(kind: str, lo, hi, value, name: str):
    if kind == "real":
        return float(value)
    if not isinstance(value, int):
        raise EngineError(f"cannot store real value {value!r} in int {name}")
    if lo is not None and not lo <= value <= hi:
        raise EngineError(f"bound violation: {name} = {value} outside [{lo},{hi}]")
    return value


def compile_function(fdef, outer: Resolver) -> Callable:
    slots: dict[str, int] = {}
    kinds: list[tuple[str, Optional[int], Optional[int]]] = []

    def alloc(name, kind, lo=None, hi=None):
        slots[name] = len(kinds)
        kinds.append((kind, lo, hi))
        return slots[name]

    for p in fdef.params:
        alloc(p.name, p.kind, *( (0, 1) if p.kind == "bool" else (None, None)))
    r = _FuncResolver(outer, slots)

    def stmt(s) -> Callable:
        t = type(s)
        if t is Block:
            parts = [stmt(x) for x in s.stmts]

            def run_block(g, l):
                for p in parts:
                    res = p(g, l)
                    if res is not None:
                        return res
                return None

            return run_block
        if t is LocalDecl:
            lo, hi = (0, 1) if s.kind == "bool" else (s.lo, s.hi)
            i = alloc(s.name, s.kind, lo, hi)
            init = compile_expr(s.init, r) if s.init is not None else (lambda g, l: 0)
            kind, name = s.kind, s.name

            def run_decl(g, l):
                l[i] = _coerce(kind, lo, hi, init(g, l), name)

            return run_decl
        if t is Assign:
            i = slots[s.name]
            kind, lo, hi = kinds[i]
            value = compile_expr(s.value, r)
            op = s.op
            name = s.name

            def run_assign(g, l):
                v = value(g, l)
                if op != "=":
                    v = _BINOPS[op[0]](l[i], v)
                l[i] = _coerce(kind, lo, hi, v, name)

            return run_assign
        if t is If:
            test = compile_expr(s.test, r)
            then = stmt(s.then)
            other = stmt(s.other) if s.other is not None else (lambda g, l: None)
            return lambda g, l: then(g, l) if test(g, l) else other(g, l)
        if t is For:
            lo = compile_expr(s.lo, r)
            hi = compile_expr(s.hi, r)
            i = alloc(s.var, "int")
            body = stmt(s.body)

            def run_for(g, l):
                for k in range(lo(g, l), hi(g, l) + 1):
                    l[i] = k
                    res = body(g, l)
                    if res is not None:
                        return res
                return None

            return run_for
        if t is Return:
            value = compile_expr(s.value, r)
            return lambda g, l: (_RETURN, value(g, l))
        raise EngineError(f"cannot compile statement {s!r}")

    body = stmt(fdef.body)
    ret = fdef.ret
    nparams = len(fdef.params)
    pkinds = [(p.kind, p.name) for p in fdef.params]
    name = fdef.name

    def call(g, args):
        l = [0] * len(kinds)
        for k in range(nparams):
            kind, pname = pkinds[k]
            l[k] = _coerce(kind, *kinds[k][1:], args[k], pname)
        res = body(g, l)
        if res is None:
            raise EngineError(f"function {name} ended without return")
        v = res[1]
        return float(v) if ret == "real" else _coerce(ret, None, None, v, name)

    return call


# -- whole networks ---------------------------------------------------------

@dataclass
class Slot:
    index: int
    decl: VarDecl


class _NetResolver(Resolver):
    def __init__(self, consts: dict, slots: dict[str, Slot], funcs: dict, net: AutomatonNetwork):
        self.consts = consts
        self.slots = slots
        self.funcs = funcs
        self.net = net

    def const_value(self, name):
        return self.consts.get(name)

    def var(self, name):
        if name in self.consts:
            c = self.consts[name]
            return lambda g, l: c
        if name not in self.slots:
            raise EngineError(f"undeclared identifier {name!r}")
        i = self.slots[name].index
        return lambda g, l: g[i]

    def array(self, name):
        return self.var(name)

    def func(self, name):
        if name not in self.funcs:
            raise EngineError(f"undeclared function {name!r}")
        return self.funcs[name]


@dataclass
class Group:
    """Edges sharing (source, guard, sync, weighted); fires as one choice."""

    guard: Optional[Callable]
    send: Optional[bool]  # None for internal edges
    channel: int
    edges: list  # [(edge_index, target, weight_fn | None, update_fn)]


@dataclass
class Program:
    net: AutomatonNetwork
    consts: dict
    slots: dict[str, Slot]
    resolver: _NetResolver
    groups: list[list[list[Group]]]  # automaton -> location -> groups
    committed: list[list[bool]]
    broadcast: list[bool]
    initial_locations: tuple[int, ...]
    initial_values: tuple

    def slot(self, name: str) -> int:
        return self.slots[name].index


def _setter(slot: Slot, index_fn: Optional[Callable]):
    d = slot.decl
    i = slot.index
    kind, lo, hi, name = d.kind, d.lo, d.hi, d.name
    if index_fn is None:
        if kind == "real":
            def set_scalar(g, l, v):
                g[i] = float(v)
        else:
            def set_scalar(g, l, v):
                if v.__class__ is not int:
                    raise EngineError(f"cannot store real value {v!r} in int {name}")
                if not lo <= v <= hi:
                    raise EngineError(f"bound violation: {name} = {v} outside [{lo},{hi}]")
                g[i] = v
        return set_scalar

    def set_elem(g, l, v):
        arr = g[i]
        k = index_fn(g, l)
        if not isinstance(k, int) or not 0 <= k < len(arr):
            raise EngineError(f"index {k} out of range for {name}[{len(arr)}]")
        v = _coerce(kind, lo, hi, v, f"{name}[{k}]")
        g[i] = arr[:k] + (v,) + arr[k + 1:]

    return set_elem


def compile_assign(a: Assign, r: _NetResolver) -> Callable:
    if a.name in r.consts or a.name not in r.slots:
        raise EngineError(f"cannot assign to {a.name!r}")
    slot = r.slots[a.name]
    index_fn = compile_expr(a.index, r) if a.index is not None else None
    setter = _setter(slot, index_fn)
    value = compile_expr(a.value, r)
    if a.op == "=":
        return lambda g, l: setter(g, l, value(g, l))
    current = compile_expr(Var(a.name) if a.index is None else Index(a.name, a.index), r)
    op = _BINOPS[a.op[0]]
    return lambda g, l: setter(g, l, op(current(g, l), value(g, l)))


def _updates(assigns, r) -> Callable:
    fns = [compile_assign(a, r) for a in assigns]
    if not fns:
        return None
    if len(fns) == 1:
        return fns[0]

    def run(g, l):
        for f in fns:
            f(g, l)

    return run


def compile_network(net: AutomatonNetwork) -> Program:
    consts: dict = {}
    slots: dict[str, Slot] = {}
    values = iter(net.initial_values)
    init_vals = []
    for d in net.variables:
        if d.const:
            consts[d.name] = next(values)
        else:
            slots[d.name] = Slot(len(init_vals), d)
            init_vals.append(next(values))
    funcs: dict = {}
    r = _NetResolver(consts, slots, funcs, net)
    for f in net.functions:
        funcs[f.name] = compile_function(f, r)

    chan_index = {c.name: i for i, c in enumerate(net.channels)}
    groups: list[list[list[Group]]] = []
    committed: list[list[bool]] = []
    for a in net.automata:
        loc_index = {loc.name: i for i, loc in enumerate(a.locations)}
        per_loc: list[list[Group]] = [[] for _ in a.locations]
        keyed: dict = {}
        for ei, e in enumerate(a.edges):
            src = loc_index[e.source]
            entry = (
                ei,
                loc_index[e.target],
                compile_expr(e.weight, r) if e.weight is not None else None,
                _updates(e.updates, r),
            )
            if e.weight is not None:
                key = (src, e.guard, e.sync)
                if key in keyed:
                    keyed[key].edges.append(entry)
                    continue
            grp = Group(
                guard=compile_expr(e.guard, r) if e.guard is not None else None,
                send=None if e.sync is None else e.sync.send,
                channel=-1 if e.sync is None else chan_index[e.sync.channel],
                edges=[entry],
            )
            if e.weight is not None:
                keyed[(src, e.guard, e.sync)] = grp
            per_loc[src].append(grp)
        groups.append(per_loc)
        committed.append([loc.committed for loc in a.locations])

    return Program(
        net=net,
        consts=consts,
        slots=slots,
        resolver=r,
        groups=groups,
        committed=committed,
        broadcast=[c.broadcast for c in net.channels],
        initial_locations=tuple(a.initial for a in net.automata),
        initial_values=tuple(init_vals),
    )
