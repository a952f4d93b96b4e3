"""Canonical pretty-printer. ``parse(format_decls(d))`` reproduces ``d``
structurally (spans aside); parentheses are emitted only where precedence
requires them.
"""

from __future__ import annotations

from .ast import (
    ApplyDecl, Binary, Call, CharacteristicDecl, FunctionDecl, IfExpr,
    Literal, MetricDecl, Ref, RuleDecl, SensorDecl, SpecModel,
    TimeRoutineDecl, TIME_FIELDS, Unary, WEEKDAY_NAMES,
)

_PREC = {
    "implies": 1, "or": 2, "and": 3,
    "<": 4, "<=": 4, ">": 4, ">=": 4, "==": 4, "!=": 4,
    "+": 5, "-": 5, "*": 6, "/": 6,
}
_UNARY_PREC = 7


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _number(value: float) -> str:
    return repr(float(value))


def format_period(seconds: int) -> str:
    if seconds % 3600 == 0:
        return f"{seconds // 3600}h"
    if seconds % 60 == 0:
        return f"{seconds // 60}min"
    return f"{seconds}s"


def format_expr(expr, parent_prec: int = 0) -> str:
    if isinstance(expr, Literal):
        text = _number(expr.value)
        if expr.unit is not None:
            text += " " + _quote(expr.unit)
        return text
    if isinstance(expr, Ref):
        return expr.name
    if isinstance(expr, Call):
        return f"{expr.name}({', '.join(format_expr(a) for a in expr.args)})"
    if isinstance(expr, Unary):
        inner = format_expr(expr.operand, _UNARY_PREC)
        text = f"not {inner}" if expr.op == "not" else f"-{inner}"
        return f"({text})" if _UNARY_PREC < parent_prec else text
    if isinstance(expr, Binary):
        prec = _PREC[expr.op]
        text = (f"{format_expr(expr.left, prec)} {expr.op} "
                f"{format_expr(expr.right, prec + 1)}")
        return f"({text})" if prec < parent_prec else text
    if isinstance(expr, IfExpr):
        text = (f"if {format_expr(expr.cond)} then {format_expr(expr.then)} "
                f"else {format_expr(expr.orelse)}")
        return f"({text})" if parent_prec > 0 else text
    raise TypeError(f"not an expression: {expr!r}")


def _format_values(field: str, values: frozenset) -> str:
    ordered = sorted(values)
    parts = []
    i = 0
    while i < len(ordered):
        j = i
        while j + 1 < len(ordered) and ordered[j + 1] == ordered[j] + 1:
            j += 1
        def name(v: int) -> str:
            return WEEKDAY_NAMES[v] if field == "weekday" else str(v)
        if j > i:
            parts.append(f"{name(ordered[i])}..{name(ordered[j])}")
        else:
            parts.append(name(ordered[i]))
        i = j + 1
    return ",".join(parts)


def format_decl(decl) -> str:
    if isinstance(decl, SensorDecl):
        return f"sensor {decl.name} : {_quote(decl.unit)} @ {format_period(decl.period)};"
    if isinstance(decl, FunctionDecl):
        return f"function {decl.name}({', '.join(decl.params)}) = {format_expr(decl.body)};"
    if isinstance(decl, RuleDecl):
        when = f" when {decl.when}" if decl.when else ""
        return f"rule {decl.name}({', '.join(decl.params)}){when} = {format_expr(decl.body)};"
    if isinstance(decl, CharacteristicDecl):
        params = decl.x_param + (f", {decl.y_param}" if decl.y_param else "")
        parts = [f"characteristic {decl.name}({params})"]
        for label, pts in (("lower", decl.lower), ("upper", decl.upper)):
            if pts is not None:
                body = ", ".join(f"({_number(x)}, {_number(y)})" for x, y in pts)
                parts.append(f"{label} [{body}]")
        return " ".join(parts) + ";"
    if isinstance(decl, MetricDecl):
        text = f"metric {decl.name} = {decl.base_fn}({decl.context}) per {decl.quant}"
        if decl.coverage != 0.9:
            text += f" coverage {_number(decl.coverage)}"
        return text + ";"
    if isinstance(decl, TimeRoutineDecl):
        ranges = ", ".join(
            " ".join(f"{f} {_format_values(f, r[f])}" for f in TIME_FIELDS if f in r)
            for r in decl.ranges)
        text = f"timeroutine {decl.name} = {{{ranges}}}"
        if decl.includes:
            text += " include " + ", ".join(decl.includes)
        if decl.excludes:
            text += " exclude " + ", ".join(decl.excludes)
        return text + ";"
    if isinstance(decl, ApplyDecl):
        binds = ", ".join(f"{k} = {v}" for k, v in decl.binding.items())
        return f"apply {decl.template} as {decl.name} with ({binds});"
    raise TypeError(f"not a declaration: {decl!r}")


def format_decls(decls) -> str:
    return "\n".join(format_decl(d) for d in decls) + ("\n" if decls else "")


def format_model(model: SpecModel) -> str:
    decls = list(model.sensors.values()) + list(model.artifacts.values())
    return format_decls(decls)
