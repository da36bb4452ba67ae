"""Pretty-printer producing ``.anm`` text that parses back to an equal network."""

from __future__ import annotations

from .ast import (
    INT_MAX,
    INT_MIN,
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
)


def format_expr(e) -> str:
    t = type(e)
    if t is IntLit:
        return str(e.value)
    if t is RealLit:
        s = repr(float(e.value))
        return s if ("." in s or "e" in s) else s + ".0"
    if t is Var:
        return e.name
    if t is Index:
        return f"{e.name}[{format_expr(e.index)}]"
    if t is Unary:
        return f"{e.op}({format_expr(e.operand)})"
    if t is Binary:
        return f"({format_expr(e.left)} {e.op} {format_expr(e.right)})"
    if t is Cond:
        return f"({format_expr(e.test)} ? {format_expr(e.then)} : {format_expr(e.other)})"
    if t is Call:
        return f"{e.func}({', '.join(format_expr(a) for a in e.args)})"
    if t is LocRef:
        return f"{e.automaton}.{e.location}"
    raise TypeError(f"not an expression: {e!r}")


def _type(kind, lo, hi) -> str:
    if kind != "int":
        return kind
    if lo == INT_MIN and hi == INT_MAX:
        return "int"
    return f"int[{lo},{hi}]"


def _assign(a: Assign) -> str:
    target = a.name if a.index is None else f"{a.name}[{format_expr(a.index)}]"
    return f"{target} {a.op} {format_expr(a.value)}"


def _stmt(s, indent: str) -> list[str]:
    t = type(s)
    if t is Block:
        out = [indent + "{"]
        for x in s.stmts:
            out += _stmt(x, indent + "    ")
        return out + [indent + "}"]
    if t is LocalDecl:
        init = f" = {format_expr(s.init)}" if s.init is not None else ""
        return [f"{indent}{_type(s.kind, s.lo, s.hi)} {s.name}{init};"]
    if t is Assign:
        return [f"{indent}{_assign(s)};"]
    if t is Return:
        return [f"{indent}return {format_expr(s.value)};"]
    if t is If:
        out = [f"{indent}if ({format_expr(s.test)})"] + _body(s.then, indent)
        if s.other is not None:
            out += [f"{indent}else"] + _body(s.other, indent)
        return out
    if t is For:
        return [f"{indent}for ({s.var} : {format_expr(s.lo)} .. {format_expr(s.hi)})"] + _body(s.body, indent)
    raise TypeError(f"not a statement: {s!r}")


def _body(s, indent: str) -> list[str]:
    # a single statement is printed bare; wrapping it in braces would change the tree
    return _stmt(s, indent if type(s) is Block else indent + "    ")


def format_model(net: AutomatonNetwork) -> str:
    lines: list[str] = []
    for d in net.variables:
        head = ("const " if d.const else "") + _type(d.kind, d.lo, d.hi) + " " + d.name
        if d.size is not None:
            head += f"[{d.size}]"
        if d.init is not None:
            if isinstance(d.init, tuple):
                head += " = {" + ", ".join(format_expr(x) for x in d.init) + "}"
            else:
                head += " = " + format_expr(d.init)
        lines.append(head + ";")
    for c in net.channels:
        lines.append(("broadcast " if c.broadcast else "") + f"chan {c.name};")
    for f in net.functions:
        params = ", ".join(f"{p.kind} {p.name}" for p in f.params)
        lines.append(f"{f.ret} {f.name}({params})")
        lines += _stmt(f.body, "")
    for a in net.automata:
        lines.append(f"automaton {a.name} {{")
        for loc in a.locations:
            flags = (" initial" if loc.initial else "") + (" committed" if loc.committed else "")
            lines.append(f"    loc {loc.name}{flags};")
        for e in a.edges:
            lines.append(f"    edge {e.source} -> {e.target} {{")
            if e.guard is not None:
                lines.append(f"        guard: {format_expr(e.guard)};")
            if e.sync is not None:
                lines.append(f"        sync: {e.sync.channel}{'!' if e.sync.send else '?'};")
            if e.updates:
                lines.append("        update: " + ", ".join(_assign(u) for u in e.updates) + ";")
            if e.weight is not None:
                lines.append(f"        weight: {format_expr(e.weight)};")
            lines.append("    }")
        lines.append("}")
    return "\n".join(lines) + "\n"
