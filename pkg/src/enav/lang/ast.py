"""Syntax tree for the functional-specification language.

Nodes compare structurally; source spans and analysis annotations
(resolution targets, inferred types, units) are excluded from equality so
that parse/format round-trips can be checked with plain ``==``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


@dataclass(frozen=True)
class Span:
    file: str
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col}"


@dataclass
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    message: str
    span: Optional[Span] = None

    def __str__(self) -> str:
        where = f"{self.span}: " if self.span else ""
        return f"{where}{self.severity}: {self.message} [{self.code}]"


def errors(diagnostics) -> list["Diagnostic"]:
    return [d for d in diagnostics if d.severity == "error"]


# --- expressions ----------------------------------------------------------

@dataclass
class Literal:
    value: float
    unit: Optional[str] = None
    span: Optional[Span] = field(default=None, compare=False, repr=False)
    ty: Optional[str] = field(default=None, compare=False, repr=False)


@dataclass
class Ref:
    """Bare identifier: a formal parameter, a zero-argument artifact, or
    (after template instantiation) a concrete sensor."""

    name: str
    span: Optional[Span] = field(default=None, compare=False, repr=False)
    ty: Optional[str] = field(default=None, compare=False, repr=False)
    target: Optional[tuple] = field(default=None, compare=False, repr=False)


@dataclass
class Call:
    name: str
    args: list
    span: Optional[Span] = field(default=None, compare=False, repr=False)
    ty: Optional[str] = field(default=None, compare=False, repr=False)
    target: Optional[tuple] = field(default=None, compare=False, repr=False)


@dataclass
class Unary:
    op: str  # "not" | "-"
    operand: "Expr"
    span: Optional[Span] = field(default=None, compare=False, repr=False)
    ty: Optional[str] = field(default=None, compare=False, repr=False)


@dataclass
class Binary:
    op: str  # and or implies + - * / < <= > >= == !=
    left: "Expr"
    right: "Expr"
    span: Optional[Span] = field(default=None, compare=False, repr=False)
    ty: Optional[str] = field(default=None, compare=False, repr=False)


@dataclass
class IfExpr:
    cond: "Expr"
    then: "Expr"
    orelse: "Expr"
    span: Optional[Span] = field(default=None, compare=False, repr=False)
    ty: Optional[str] = field(default=None, compare=False, repr=False)


Expr = Union[Literal, Ref, Call, Unary, Binary, IfExpr]

COMPARISON_OPS = ("<", "<=", ">", ">=", "==", "!=")
ARITH_OPS = ("+", "-", "*", "/")
LOGIC_OPS = ("and", "or", "implies")


# --- declarations ---------------------------------------------------------

@dataclass
class SensorDecl:
    name: str
    unit: str
    period: int  # seconds
    span: Optional[Span] = field(default=None, compare=False, repr=False)


@dataclass
class FunctionDecl:
    name: str
    params: list
    body: Expr
    span: Optional[Span] = field(default=None, compare=False, repr=False)
    provenance: Optional[tuple] = field(default=None, compare=False, repr=False)


@dataclass
class RuleDecl:
    name: str
    params: list
    body: Expr
    when: Optional[str] = None
    span: Optional[Span] = field(default=None, compare=False, repr=False)
    provenance: Optional[tuple] = field(default=None, compare=False, repr=False)


@dataclass
class CharacteristicDecl:
    """Piecewise-linear relation between two sensor dimensions.

    Function form (no y parameter) looks up the single bound curve; rule
    form checks ``lower(x) <= y <= upper(x)``.
    """

    name: str
    x_param: str
    y_param: Optional[str]
    lower: Optional[tuple] = None  # ((x, y), ...) strictly increasing in x
    upper: Optional[tuple] = None
    span: Optional[Span] = field(default=None, compare=False, repr=False)
    provenance: Optional[tuple] = field(default=None, compare=False, repr=False)

    @property
    def is_rule_form(self) -> bool:
        return self.y_param is not None


QUANTIZATIONS = ("day", "week", "month", "quarter", "year")


@dataclass
class MetricDecl:
    name: str
    base_fn: str  # AVERAGE MINIMUM MAXIMUM SUM COUNT | library: STDDEV
    context: str  # sensor or concrete numeric artifact
    quant: str
    coverage: float = 0.9
    span: Optional[Span] = field(default=None, compare=False, repr=False)
    provenance: Optional[tuple] = field(default=None, compare=False, repr=False)
    context_target: Optional[tuple] = field(default=None, compare=False, repr=False)


TIME_FIELDS = ("year", "month", "day", "hour", "minute", "second", "weekday")
WEEKDAY_NAMES = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")

FIELD_BOUNDS = {
    "year": (1, 9999),
    "month": (1, 12),
    "day": (1, 31),
    "hour": (0, 23),
    "minute": (0, 59),
    "second": (0, 59),
    "weekday": (0, 6),  # Mon = 0
}


@dataclass
class TimeRoutineDecl:
    name: str
    ranges: list  # list[dict[field -> frozenset[int]]], OR over ranges, AND over fields
    includes: list = field(default_factory=list)
    excludes: list = field(default_factory=list)
    span: Optional[Span] = field(default=None, compare=False, repr=False)
    provenance: Optional[tuple] = field(default=None, compare=False, repr=False)


@dataclass
class ApplyDecl:
    name: str  # instance id
    template: str
    binding: dict  # formal -> concrete sensor id
    span: Optional[Span] = field(default=None, compare=False, repr=False)


Artifact = Union[FunctionDecl, RuleDecl, CharacteristicDecl, MetricDecl, TimeRoutineDecl, ApplyDecl]
Decl = Union[SensorDecl, Artifact]


def artifact_params(artifact: Artifact) -> list:
    """Formal sensor parameters an artifact exposes for binding."""
    if isinstance(artifact, (FunctionDecl, RuleDecl)):
        return list(artifact.params)
    if isinstance(artifact, CharacteristicDecl):
        return [artifact.x_param] + ([artifact.y_param] if artifact.y_param else [])
    return []


def value_kind(artifact: Artifact) -> Optional[str]:
    """"numeric" / "boolean" for value-producing artifacts, else None."""
    if isinstance(artifact, FunctionDecl):
        return "numeric"
    if isinstance(artifact, RuleDecl):
        return "boolean"
    if isinstance(artifact, CharacteristicDecl):
        return "boolean" if artifact.is_rule_form else "numeric"
    return None


@dataclass
class SpecModel:
    """Merged, resolved declaration set.

    ``artifacts`` holds everything declared (including apply declarations
    under their instance ids); ``instances`` holds the concrete artifacts
    produced from applies.
    """

    sensors: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    instances: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)

    def has_errors(self) -> bool:
        return bool(errors(self.diagnostics))

    def source_span(self, node) -> Optional[Span]:
        return getattr(node, "span", None)


def walk_expr(expr: Expr):
    """Yield every node of an expression tree, preorder."""
    yield expr
    if isinstance(expr, Call):
        for a in expr.args:
            yield from walk_expr(a)
    elif isinstance(expr, Unary):
        yield from walk_expr(expr.operand)
    elif isinstance(expr, Binary):
        yield from walk_expr(expr.left)
        yield from walk_expr(expr.right)
    elif isinstance(expr, IfExpr):
        yield from walk_expr(expr.cond)
        yield from walk_expr(expr.then)
        yield from walk_expr(expr.orelse)
