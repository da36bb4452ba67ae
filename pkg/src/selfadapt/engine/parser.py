"""Recursive-descent parser for ``.anm`` model text.

Names must be declared before use. Every failure surfaces as
:class:`ModelError` carrying a line and column; no other exception escapes
:func:`parse_model`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from typing import Optional

from .ast import (
    INT_MAX,
    INT_MIN,
    Assign,
    Automaton,
    AutomatonNetwork,
    Binary,
    Block,
    Call,
    Channel,
    Cond,
    Edge,
    For,
    FuncDef,
    If,
    Index,
    IntLit,
    LocalDecl,
    Location,
    LocRef,
    Param,
    RealLit,
    Return,
    Sync,
    Unary,
    Var,
    VarDecl,
)
from .compile import BUILTINS, EngineError, Resolver, compile_expr


class ModelError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        super().__init__(f"line {line}, col {col}: {message}" if line else message)


KEYWORDS = {
    "const", "int", "real", "bool", "chan", "broadcast", "automaton", "loc",
    "edge", "initial", "committed", "guard", "sync", "update", "weight", "if",
    "else", "for", "return", "true", "false",
}

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<real>\d+\.\d+(?:[eE][-+]?\d+)?|\d+[eE][-+]?\d+)
  | (?P<int>\d+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>\.\.|->|==|!=|<=|>=|&&|\|\||\+=|-=|\*=|/=|[-+*/%<>=!?:;,()\[\]{}.])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass
class Token:
    kind: str  # 'id', 'kw', 'int', 'real', 'op', 'eof'
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ModelError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind == "id" and s in KEYWORDS:
            kind = "kw"
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, s, line, col))
        nl = s.count("\n")
        if nl:
            line += nl
            line_start = pos + s.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# Binary operator precedence, loosest first.
_LEVELS = [("||",), ("&&",), ("==", "!="), ("<", "<=", ">", ">="), ("+", "-"), ("*", "/", "%")]


@dataclass
class _Sym:
    kind: str  # 'var', 'const', 'chan', 'func', 'local', 'loopvar'
    type: str  # 'int' | 'real' | 'bool' | ''
    array: bool = False
    nargs: int = 0


class _ConstResolver(Resolver):
    def __init__(self, consts: dict):
        self.consts = consts

    def const_value(self, name):
        return self.consts.get(name)

    def var(self, name):
        raise EngineError(f"{name} is not a constant")


class Parser:
    def __init__(self, text: str, predicate_net: Optional[AutomatonNetwork] = None):
        self.toks = tokenize(text)
        self.i = 0
        self.scope: dict[str, _Sym] = {}
        self.locals: Optional[dict[str, _Sym]] = None
        self.consts: dict = {}
        self.predicate_net = predicate_net
        self.free_vars = False
        if predicate_net is not None:
            self._load_scope(predicate_net)

    # -- token helpers ------------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Optional[Token] = None):
        t = tok or self.tok
        raise ModelError(msg, t.line, t.col)

    def at(self, text: str) -> bool:
        t = self.tok
        return t.text == text and t.kind in ("op", "kw")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            self.error(f"expected {text!r} but found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self, what: str = "identifier") -> Token:
        t = self.tok
        if t.kind != "id":
            self.error(f"expected {what} but found {t.text or 'end of input'!r}")
        self.i += 1
        return t

    # -- scope --------------------------------------------------------------
    def _load_scope(self, net: AutomatonNetwork):
        values = iter(net.initial_values)
        for d in net.variables:
            v = next(values)
            self.scope[d.name] = _Sym("const" if d.const else "var", d.kind, d.size is not None)
            if d.const:
                self.consts[d.name] = v
        for c in net.channels:
            self.scope[c.name] = _Sym("chan", "")
        for f in net.functions:
            self.scope[f.name] = _Sym("func", f.ret, nargs=len(f.params))

    def lookup(self, tok: Token) -> Optional[_Sym]:
        if self.locals is not None and tok.text in self.locals:
            return self.locals[tok.text]
        sym = self.scope.get(tok.text)
        if sym is None and not self.free_vars:
            self.error(f"undeclared identifier {tok.text!r}", tok)
        return sym

    def declare(self, tok: Token, sym: _Sym, local: bool = False):
        table = self.locals if local else self.scope
        if tok.text in table or (local and tok.text in self.scope and self.scope[tok.text].kind == "func"):
            self.error(f"duplicate declaration of {tok.text!r}", tok)
        if tok.text in BUILTINS:
            self.error(f"{tok.text!r} is a builtin function", tok)
        table[tok.text] = sym

    def const_eval(self, e, tok: Token, what: str = "constant expression"):
        try:
            return compile_expr(e, _ConstResolver(self.consts))(None, None)
        except EngineError as err:
            self.error(f"{what} is not constant: {err}", tok)
        except (OverflowError, ValueError, TypeError) as err:
            self.error(f"invalid {what}: {err}", tok)

    def try_const(self, e):
        try:
            return compile_expr(e, _ConstResolver(self.consts))(None, None)
        except Exception:
            return None

    # -- expressions --------------------------------------------------------
    def expression(self):
        """Returns (expr, type) where type is 'int' or 'real'."""
        return self.ternary()

    def ternary(self):
        test, tt = self.binary(0)
        if self.at("?"):
            self.i += 1
            a, ta = self.ternary()
            self.expect(":")
            b, tb = self.ternary()
            return Cond(test, a, b), "real" if "real" in (ta, tb) else "int"
        return test, tt

    def binary(self, level: int):
        if level == len(_LEVELS):
            return self.unary()
        left, lt = self.binary(level + 1)
        ops = _LEVELS[level]
        while self.tok.kind == "op" and self.tok.text in ops:
            optok = self.tok
            op = optok.text
            self.i += 1
            right, rt = self.binary(level + 1)
            if op in ("/", "%"):
                c = self.try_const(right)
                if c is not None and c == 0:
                    self.error("division by constant zero", optok)
            if op == "%" and "real" in (lt, rt):
                self.error("'%' requires int operands", optok)
            left = Binary(op, left, right)
            if level >= 4 and "real" in (lt, rt):
                lt = "real"
            else:
                lt = "int" if level < 4 else lt if lt == rt else "real" if "real" in (lt, rt) else "int"
        return left, lt

    def unary(self):
        if self.tok.kind == "op" and self.tok.text in ("-", "+", "!"):
            op = self.tok.text
            self.i += 1
            e, t = self.unary()
            if op == "-" and isinstance(e, (IntLit, RealLit)):
                return type(e)(-e.value), t
            return Unary(op, e), ("int" if op == "!" else t)
        return self.primary()

    def primary(self):
        t = self.tok
        if t.kind == "int":
            self.i += 1
            v = int(t.text)
            if v > 2**62:
                self.error("integer literal too large", t)
            return IntLit(v), "int"
        if t.kind == "real":
            self.i += 1
            v = float(t.text)
            if not math.isfinite(v):
                self.error("real literal out of range", t)
            return RealLit(v), "real"
        if t.kind == "kw" and t.text in ("true", "false"):
            self.i += 1
            return IntLit(1 if t.text == "true" else 0), "int"
        if self.accept("("):
            e = self.expression()
            self.expect(")")
            return e
        if t.kind == "id":
            self.i += 1
            if self.at("(") and (t.text in BUILTINS or (t.text in self.scope and self.scope[t.text].kind == "func")):
                return self.call(t)
            if self.at(".") and self.predicate_net is not None:
                self.i += 1
                loc = self.ident("location name")
                try:
                    self.predicate_net.automaton(t.text).location_index(loc.text)
                except KeyError as err:
                    self.error(str(err.args[0]), t)
                return LocRef(t.text, loc.text), "int"
            sym = self.lookup(t)
            if sym is not None and sym.kind in ("chan", "func"):
                self.error(f"{t.text!r} is not a variable", t)
            if self.at("["):
                if sym is not None and not sym.array:
                    self.error(f"{t.text!r} is not an array", t)
                self.i += 1
                idx, it = self.expression()
                if it != "int":
                    self.error("array index must be int", t)
                self.expect("]")
                return Index(t.text, idx), _scalar_type(sym)
            if sym is not None and sym.array:
                self.error(f"array {t.text!r} used without index", t)
            return Var(t.text), _scalar_type(sym)
        self.error(f"unexpected {t.text or 'end of input'!r} in expression")

    def call(self, name: Token):
        self.expect("(")
        args, types = [], []
        if not self.at(")"):
            while True:
                a, at = self.expression()
                args.append(a)
                types.append(at)
                if not self.accept(","):
                    break
        self.expect(")")
        if name.text in BUILTINS:
            n = BUILTINS[name.text][0]
            ret = "int" if name.text in ("floor", "ceil", "round") else ("real" if "real" in types else "int")
        else:
            sym = self.scope[name.text]
            n = sym.nargs
            ret = "real" if sym.type == "real" else "int"
        if len(args) != n:
            self.error(f"{name.text} expects {n} argument(s), got {len(args)}", name)
        return Call(name.text, tuple(args)), ret

    # -- declarations -------------------------------------------------------
    def parse(self) -> AutomatonNetwork:
        variables, channels, functions, automata = [], [], [], []
        init_values = []
        while self.tok.kind != "eof":
            if self.at("automaton"):
                automata.append(self.automaton())
            elif self.at("chan") or self.at("broadcast"):
                channels.extend(self.channel_decl())
            elif self.at("const") or self.at("int") or self.at("real") or self.at("bool"):
                if self._is_function():
                    functions.append(self.function())
                else:
                    d, v = self.var_decl()
                    variables.append(d)
                    init_values.append(v)
            else:
                self.error(f"unexpected {self.tok.text!r} at top level")
        if not automata:
            self.error("model declares no automaton")
        names = [a.name for a in automata]
        return AutomatonNetwork(
            tuple(variables), tuple(channels), tuple(functions), tuple(automata),
            initial_values=tuple(init_values),
        )

    def _is_function(self) -> bool:
        j = self.i
        if self.toks[j].text == "const":
            return False
        j += 1
        if self.toks[j].text == "[":
            return False
        return self.toks[j].kind == "id" and self.toks[j + 1].text == "("

    def type_spec(self):
        t = self.tok
        if self.accept("real"):
            return "real", None, None
        if self.accept("bool"):
            return "bool", 0, 1
        if self.accept("int"):
            if self.accept("["):
                lo_e, _ = self.expression()
                self.expect(",")
                hi_e, _ = self.expression()
                self.expect("]")
                lo = self.const_eval(lo_e, t, "lower bound")
                hi = self.const_eval(hi_e, t, "upper bound")
                if not (isinstance(lo, int) and isinstance(hi, int)):
                    self.error("int bounds must be integers", t)
                if lo > hi:
                    self.error(f"empty range [{lo},{hi}]", t)
                return "int", lo, hi
            return "int", INT_MIN, INT_MAX
        self.error(f"expected a type but found {t.text!r}")

    def var_decl(self):
        const = self.accept("const")
        kind, lo, hi = self.type_spec()
        name = self.ident("variable name")
        size = None
        if self.accept("["):
            st = self.tok
            se, _ = self.expression()
            self.expect("]")
            size = self.const_eval(se, st, "array size")
            if not isinstance(size, int) or size <= 0 or size > 100000:
                self.error("array size must be a positive int constant", st)
        init = None
        value = None
        if self.accept("="):
            itok = self.tok
            if self.accept("{"):
                if size is None:
                    self.error("brace initializer on a scalar", itok)
                elems = []
                while True:
                    e, _ = self.expression()
                    elems.append(e)
                    if not self.accept(","):
                        break
                self.expect("}")
                if len(elems) != size:
                    self.error(f"initializer has {len(elems)} elements, array has {size}", itok)
                init = tuple(elems)
                value = tuple(self._init_value(kind, lo, hi, e, itok) for e in elems)
            else:
                if size is not None:
                    self.error("array initializer must be a brace list", itok)
                e, et = self.expression()
                if et == "real" and kind != "real":
                    self.error("cannot initialize int with a real value", itok)
                init = e
                value = self._init_value(kind, lo, hi, e, itok)
        elif const:
            self.error("constant without initializer", name)
        if value is None:
            zero = 0.0 if kind == "real" else (0 if lo is None or lo <= 0 <= hi else lo)
            value = zero if size is None else (zero,) * size
        self.expect(";")
        self.declare(name, _Sym("const" if const else "var", kind, size is not None))
        if const:
            self.consts[name.text] = value
        return VarDecl(name.text, kind, lo, hi, size, init, const), value

    def _init_value(self, kind, lo, hi, e, tok):
        v = self.const_eval(e, tok, "initializer")
        if kind == "real":
            return float(v)
        if not isinstance(v, int):
            self.error("cannot initialize int with a real value", tok)
        if not lo <= v <= hi:
            self.error(f"initializer out of bounds: {v} not in [{lo},{hi}]", tok)
        return v

    def channel_decl(self):
        broadcast = self.accept("broadcast")
        self.expect("chan")
        out = []
        while True:
            name = self.ident("channel name")
            if name.text in self.scope:
                kind = "channel" if self.scope[name.text].kind == "chan" else "declaration"
                self.error(f"duplicate {kind} {name.text!r}", name)
            self.declare(name, _Sym("chan", ""))
            out.append(Channel(name.text, broadcast))
            if not self.accept(","):
                break
        self.expect(";")
        return out

    def function(self):
        rt = self.tok
        ret, _, _ = self.type_spec()
        name = self.ident("function name")
        self.expect("(")
        params = []
        self.locals = {}
        try:
            if not self.at(")"):
                while True:
                    pk, _, _ = self.type_spec()
                    pn = self.ident("parameter name")
                    self.declare(pn, _Sym("local", pk), local=True)
                    params.append(Param(pk, pn.text))
                    if not self.accept(","):
                        break
            self.expect(")")
            self._ret = ret
            body = self.block()
        finally:
            self.locals = None
        if not _always_returns(body):
            self.error(f"function {name.text!r} may end without return", rt)
        self.declare(name, _Sym("func", ret, nargs=len(params)))
        return FuncDef(name.text, ret, tuple(params), body)

    def block(self) -> Block:
        self.expect("{")
        saved = dict(self.locals)
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.error("unterminated block")
            stmts.append(self.statement())
        self.expect("}")
        self.locals = saved
        return Block(tuple(stmts))

    def statement(self):
        t = self.tok
        if self.at("{"):
            return self.block()
        if self.at("int") or self.at("real") or self.at("bool"):
            kind, lo, hi = self.type_spec()
            name = self.ident("variable name")
            init = None
            if self.accept("="):
                init, it = self.expression()
                if it == "real" and kind != "real":
                    self.error("cannot assign a real value to an int", name)
            self.expect(";")
            self.declare(name, _Sym("local", kind), local=True)
            return LocalDecl(kind, name.text, lo if kind == "int" else None, hi if kind == "int" else None, init)
        if self.accept("if"):
            self.expect("(")
            test, _ = self.expression()
            self.expect(")")
            then = self.statement()
            other = self.statement() if self.accept("else") else None
            return If(test, then, other)
        if self.accept("for"):
            self.expect("(")
            var = self.ident("loop variable")
            self.expect(":")
            lo, lt = self.expression()
            self.expect("..")
            hi, ht = self.expression()
            self.expect(")")
            if "real" in (lt, ht):
                self.error("loop bounds must be int", var)
            saved = dict(self.locals)
            self.declare(var, _Sym("loopvar", "int"), local=True)
            body = self.statement()
            self.locals = saved
            return For(var.text, lo, hi, body)
        if self.accept("return"):
            e, et = self.expression()
            if et == "real" and self._ret != "real":
                self.error("returning a real from an int function", t)
            self.expect(";")
            return Return(e)
        if t.kind == "id":
            a = self.assignment(in_function=True)
            self.expect(";")
            return a
        self.error(f"unexpected {t.text or 'end of input'!r} in statement")

    def assignment(self, in_function: bool = False) -> Assign:
        name = self.ident("assignment target")
        sym = self.lookup(name)
        if in_function:
            if self.locals is None or name.text not in self.locals:
                self.error(f"functions may only assign local variables, not {name.text!r}", name)
            if sym.kind == "loopvar":
                self.error(f"loop variable {name.text!r} is read-only", name)
        elif sym is not None and sym.kind != "var":
            self.error(f"cannot assign to {name.text!r}", name)
        index = None
        if self.at("["):
            if sym is not None and not sym.array:
                self.error(f"{name.text!r} is not an array", name)
            self.i += 1
            index, it = self.expression()
            if it != "int":
                self.error("array index must be int", name)
            self.expect("]")
        elif sym is not None and sym.array:
            self.error(f"array {name.text!r} assigned without index", name)
        op_tok = self.tok
        if op_tok.kind != "op" or op_tok.text not in ("=", "+=", "-=", "*=", "/="):
            self.error(f"expected assignment operator but found {op_tok.text!r}")
        self.i += 1
        value, vt = self.expression()
        if vt == "real" and sym is not None and _scalar_type(sym) != "real":
            self.error(f"cannot assign a real value to int {name.text!r}; use floor/ceil/round", op_tok)
        if op_tok.text == "/=":
            c = self.try_const(value)
            if c is not None and c == 0:
                self.error("division by constant zero", op_tok)
        return Assign(name.text, index, op_tok.text, value)

    def automaton(self) -> Automaton:
        self.expect("automaton")
        name = self.ident("automaton name")
        if name.text in self.scope:
            self.error(f"duplicate declaration of {name.text!r}", name)
        self.scope[name.text] = _Sym("automaton", "")
        self.expect("{")
        locations: list[Location] = []
        edges: list[Edge] = []
        loc_names: dict[str, Token] = {}
        pending_edges = []
        while not self.accept("}"):
            if self.tok.kind == "eof":
                self.error("unterminated automaton")
            if self.accept("loc"):
                ln = self.ident("location name")
                if ln.text in loc_names:
                    self.error(f"duplicate location {ln.text!r}", ln)
                initial = committed = False
                while self.tok.text in ("initial", "committed") and self.tok.kind == "kw":
                    if self.tok.text == "initial":
                        initial = True
                    else:
                        committed = True
                    self.i += 1
                self.expect(";")
                loc_names[ln.text] = ln
                locations.append(Location(ln.text, initial, committed))
            elif self.at("edge"):
                et = self.tok
                e, src, dst = self.edge()
                pending_edges.append((e, src, dst))
                edges.append(e)
            else:
                self.error(f"expected 'loc' or 'edge' but found {self.tok.text!r}")
        for e, src, dst in pending_edges:
            for tok in (src, dst):
                if tok.text not in loc_names:
                    self.error(f"undeclared location {tok.text!r}", tok)
        inits = [l for l in locations if l.initial]
        if len(inits) != 1:
            self.error(f"automaton {name.text!r} needs exactly one initial location, has {len(inits)}", name)
        return Automaton(name.text, tuple(locations), tuple(edges))

    def edge(self):
        self.expect("edge")
        src = self.ident("source location")
        self.expect("->")
        dst = self.ident("target location")
        guard = sync = weight = None
        updates: list[Assign] = []
        self.expect("{")
        seen = set()
        while not self.accept("}"):
            ct = self.tok
            if ct.kind != "kw" or ct.text not in ("guard", "sync", "update", "weight"):
                self.error(f"expected guard/sync/update/weight but found {ct.text or 'end of input'!r}")
            if ct.text in seen:
                self.error(f"duplicate {ct.text} clause", ct)
            seen.add(ct.text)
            self.i += 1
            self.expect(":")
            if ct.text == "guard":
                guard, _ = self.expression()
            elif ct.text == "weight":
                weight, wt = self.expression()
                if wt == "real":
                    self.error("weights must be int expressions", ct)
                c = self.try_const(weight)
                if c is not None and c < 0:
                    self.error("weights must be nonnegative", ct)
            elif ct.text == "sync":
                ch = self.ident("channel name")
                sym = self.scope.get(ch.text)
                if sym is None or sym.kind != "chan":
                    self.error(f"undeclared channel {ch.text!r}", ch)
                if self.accept("!"):
                    sync = Sync(ch.text, True)
                elif self.accept("?"):
                    sync = Sync(ch.text, False)
                else:
                    self.error("expected '!' or '?' after channel")
            else:
                while True:
                    updates.append(self.assignment())
                    if not self.accept(","):
                        break
            self.expect(";")
        return Edge(src.text, dst.text, guard, sync, tuple(updates), weight), src, dst


def _scalar_type(sym: Optional[_Sym]) -> str:
    if sym is None:
        return "real"
    return "real" if sym.type == "real" else "int"


def _always_returns(s) -> bool:
    if isinstance(s, Return):
        return True
    if isinstance(s, Block):
        return any(_always_returns(x) for x in s.stmts)
    if isinstance(s, If):
        return s.other is not None and _always_returns(s.then) and _always_returns(s.other)
    return False


def _guarded(fn):
    try:
        return fn()
    except ModelError:
        raise
    except RecursionError:
        raise ModelError("nesting too deep") from None
    except (EngineError, ValueError, OverflowError, TypeError, ZeroDivisionError) as err:
        raise ModelError(f"invalid model: {err}") from None


def parse_model(text: str) -> AutomatonNetwork:
    """Parse and validate model text into an :class:`AutomatonNetwork`."""
    if not isinstance(text, str):
        raise ModelError("model source must be text")
    return _guarded(lambda: Parser(text).parse())


def parse_expr(text: str):
    """Parse a standalone expression; free variables are allowed."""

    def run():
        p = Parser(text)
        p.free_vars = True
        e, _ = p.expression()
        if p.tok.kind != "eof":
            p.error(f"unexpected {p.tok.text!r} after expression")
        return e

    return _guarded(run)


def parse_predicate(text: str, net: AutomatonNetwork):
    """Parse a state predicate over ``net``; ``Automaton.Location`` is allowed."""

    def run():
        p = Parser(text, predicate_net=net)
        e, _ = p.expression()
        if p.tok.kind != "eof":
            p.error(f"unexpected {p.tok.text!r} after predicate")
        return e

    return _guarded(run)


def _literal(kind: str, v):
    return RealLit(float(v)) if kind == "real" else IntLit(int(v))


def override_initial_values(net: AutomatonNetwork, values: dict) -> AutomatonNetwork:
    decls = {d.name: i for i, d in enumerate(net.variables)}
    variables = list(net.variables)
    init_values = list(net.initial_values)
    for name, v in values.items():
        if name not in decls:
            raise ModelError(f"no variable {name!r} to override")
        i = decls[name]
        d = variables[i]
        if d.const:
            raise ModelError(f"cannot override constant {name!r}")

        def conv(x):
            if d.kind == "real":
                return float(x)
            if isinstance(x, bool):
                x = int(x)
            if not isinstance(x, int):
                if isinstance(x, float) and x.is_integer():
                    x = int(x)
                else:
                    raise ModelError(f"{name}: int variable given non-integer {x!r}")
            if not d.lo <= x <= d.hi:
                raise ModelError(f"initializer out of bounds: {name} = {x} not in [{d.lo},{d.hi}]")
            return x

        if d.size is None:
            val = conv(v)
            init = _literal(d.kind, val)
        else:
            seq = list(v)
            if len(seq) != d.size:
                raise ModelError(f"{name}: expected {d.size} values, got {len(seq)}")
            val = tuple(conv(x) for x in seq)
            init = tuple(_literal(d.kind, x) for x in val)
        variables[i] = replace(d, init=init)
        init_values[i] = val
    return AutomatonNetwork(
        tuple(variables), net.channels, net.functions, net.automata,
        initial_values=tuple(init_values),
    )
