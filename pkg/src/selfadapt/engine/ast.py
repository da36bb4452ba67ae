"""Syntax tree of the automaton model language (``.anm``).

Nodes are frozen dataclasses so two parses of the same text compare equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Union


# -- expressions ------------------------------------------------------------

@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class RealLit:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Index:
    name: str
    index: "Expr"


@dataclass(frozen=True)
class Unary:
    op: str  # '-', '+', '!'
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Cond:
    test: "Expr"
    then: "Expr"
    other: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class LocRef:
    """``Automaton.Location`` test; only legal in property predicates."""

    automaton: str
    location: str


Expr = Union[IntLit, RealLit, Var, Index, Unary, Binary, Cond, Call, LocRef]


# -- statements -------------------------------------------------------------

@dataclass(frozen=True)
class Assign:
    name: str
    index: Optional[Expr]
    op: str  # '=', '+=', '-=', '*=', '/='
    value: Expr


@dataclass(frozen=True)
class LocalDecl:
    kind: str  # 'int' | 'real' | 'bool'
    name: str
    lo: Optional[int]
    hi: Optional[int]
    init: Optional[Expr]


@dataclass(frozen=True)
class If:
    test: Expr
    then: "Stmt"
    other: Optional["Stmt"]


@dataclass(frozen=True)
class For:
    var: str
    lo: Expr
    hi: Expr
    body: "Stmt"


@dataclass(frozen=True)
class Return:
    value: Expr


@dataclass(frozen=True)
class Block:
    stmts: tuple["Stmt", ...]


Stmt = Union[Assign, LocalDecl, If, For, Return, Block]


# -- declarations -----------------------------------------------------------

INT_MIN = -32768
INT_MAX = 32767


@dataclass(frozen=True)
class VarDecl:
    name: str
    kind: str  # 'int' | 'real' | 'bool'
    lo: Optional[int] = None  # bounds of int / bool variables
    hi: Optional[int] = None
    size: Optional[int] = None  # None for scalars
    init: Union[Expr, tuple[Expr, ...], None] = None
    const: bool = False

    @property
    def bounded(self) -> bool:
        return self.kind in ("int", "bool")


@dataclass(frozen=True)
class Param:
    kind: str
    name: str


@dataclass(frozen=True)
class FuncDef:
    name: str
    ret: str
    params: tuple[Param, ...]
    body: Block


@dataclass(frozen=True)
class Channel:
    name: str
    broadcast: bool = False


@dataclass(frozen=True)
class Sync:
    channel: str
    send: bool  # True for '!', False for '?'


@dataclass(frozen=True)
class Location:
    name: str
    initial: bool = False
    committed: bool = False


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    guard: Optional[Expr] = None
    sync: Optional[Sync] = None
    updates: tuple[Assign, ...] = ()
    weight: Optional[Expr] = None


@dataclass(frozen=True)
class Automaton:
    name: str
    locations: tuple[Location, ...]
    edges: tuple[Edge, ...]

    @cached_property
    def initial(self) -> int:
        return next(i for i, loc in enumerate(self.locations) if loc.initial)

    def location_index(self, name: str) -> int:
        for i, loc in enumerate(self.locations):
            if loc.name == name:
                return i
        raise KeyError(f"{self.name} has no location {name!r}")


@dataclass(frozen=True)
class AutomatonNetwork:
    variables: tuple[VarDecl, ...]
    channels: tuple[Channel, ...]
    functions: tuple[FuncDef, ...]
    automata: tuple[Automaton, ...]
    # initial values after constant folding, one per non-const variable
    initial_values: tuple = field(default=(), compare=False, repr=False)

    @cached_property
    def program(self):
        from .compile import compile_network

        return compile_network(self)

    def automaton(self, name: str) -> Automaton:
        for a in self.automata:
            if a.name == name:
                return a
        raise KeyError(f"no automaton {name!r}")

    def automaton_index(self, name: str) -> int:
        for i, a in enumerate(self.automata):
            if a.name == name:
                return i
        raise KeyError(f"no automaton {name!r}")

    @property
    def edge_count(self) -> int:
        return sum(len(a.edges) for a in self.automata)

    def with_values(self, values: dict) -> "AutomatonNetwork":
        """Copy of the network with some initial values replaced.

        This is how runtime parameters (SNRs, loads, settings) are bound into a
        model before simulation. Constants cannot be overridden.
        """
        from .parser import override_initial_values

        return override_initial_values(self, values)
