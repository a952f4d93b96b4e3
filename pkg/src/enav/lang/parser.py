"""Recursive-descent parser for `.afs` files.

Grammar (authoritative):

    spec      := { decl }
    decl      := "sensor" ID ":" STRING "@" PERIOD ";"
               | "function" ID "(" params ")" "=" expr ";"
               | "rule" ID "(" params ")" [ "when" ID ] "=" expr ";"
               | "characteristic" ID "(" ID [ "," ID ] ")"
                    [ "lower" points ] [ "upper" points ] ";"
               | "metric" ID "=" ID "(" ID ")" "per" QUANT [ "coverage" NUMBER ] ";"
               | "timeroutine" ID "=" "{" [ ranges ] "}" [ "include" idlist ] [ "exclude" idlist ] ";"
               | "apply" ID "as" ID "with" "(" [ bind { "," bind } ] ")" ";"
    bind      := ID "=" ID
    points    := "[" point { "," point } "]"        point := "(" NUMBER "," NUMBER ")"
    ranges    := range { "," range }
    range     := fieldpat { fieldpat }               e.g.  weekday Mon..Fri hour 7..17
    fieldpat  := FIELD item { "," item }             item := value [ ".." value ]
    QUANT     := "day" | "week" | "month" | "quarter" | "year"
    PERIOD    := NUMBER ("s" | "min" | "h")

Expression precedence, loosest first: IF-THEN-ELSE, IMPLIES, OR, AND,
comparisons, additive, multiplicative, unary (NOT, minus). Binary operators
associate left. Comments run from `//` to end of line.

Errors are collected as positioned diagnostics; after an error the parser
resynchronizes at the next `;` or declaration keyword, so one bad
declaration does not hide the rest of the file.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ast import (
    ApplyDecl, Binary, Call, CharacteristicDecl, Diagnostic, FunctionDecl,
    FIELD_BOUNDS, IfExpr, Literal, MetricDecl, QUANTIZATIONS, Ref, RuleDecl,
    SensorDecl, Span, TIME_FIELDS, TimeRoutineDecl, Unary, WEEKDAY_NAMES,
)
from .lexer import Token, tokenize

DECL_KEYWORDS = ("sensor", "function", "rule", "characteristic", "metric", "timeroutine", "apply")
PERIOD_UNITS = {"s": 1, "min": 60, "h": 3600}


class ParseError(Exception):
    def __init__(self, message: str, span: Span, expected: tuple = ()):
        super().__init__(message)
        self.message = message
        self.span = span
        self.expected = expected


@dataclass
class ParseResult:
    decls: list
    diagnostics: list = field(default_factory=list)

    def has_errors(self) -> bool:
        return any(d.severity == "error" for d in self.diagnostics)


def parse(text: str, filename: str = "<spec>") -> ParseResult:
    tokens, diagnostics = tokenize(text, filename)
    parser = _Parser(tokens, filename)
    decls = parser.parse_spec()
    return ParseResult(decls, diagnostics + parser.diagnostics)


class _Parser:
    def __init__(self, tokens: list[Token], filename: str):
        self.tokens = tokens
        self.pos = 0
        self.filename = filename
        self.diagnostics: list[Diagnostic] = []

    # token plumbing

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, kind: str, value: str | None = None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (value is None or tok.value == value)

    def accept(self, kind: str, value: str | None = None) -> Token | None:
        if self.at(kind, value):
            return self.advance()
        return None

    def expect(self, kind: str, value: str | None = None, what: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind == kind and (value is None or tok.value == value):
            return self.advance()
        expected = (what or value or kind,)
        found = tok.value or tok.kind
        raise ParseError(f"expected {expected[0]!r}, found {found!r}",
                         tok.span(self.filename), expected)

    def span(self, tok: Token) -> Span:
        return tok.span(self.filename)

    def fail(self, message: str, expected: tuple = ()) -> ParseError:
        return ParseError(message, self.peek().span(self.filename), expected)

    # spec / declarations

    def parse_spec(self) -> list:
        decls = []
        while not self.at("eof"):
            try:
                decls.append(self.parse_decl())
            except ParseError as err:
                self.diagnostics.append(Diagnostic(
                    "error", "SyntaxError",
                    err.message + (f" (expected one of: {', '.join(err.expected)})"
                                   if len(err.expected) > 1 else ""),
                    err.span))
                self.synchronize()
        return decls

    def synchronize(self) -> None:
        while not self.at("eof"):
            if self.accept("op", ";"):
                return
            if self.peek().kind == "kw" and self.peek().value in DECL_KEYWORDS:
                return
            self.advance()

    def parse_decl(self):
        tok = self.peek()
        if tok.kind != "kw" or tok.value not in DECL_KEYWORDS:
            raise ParseError(
                f"expected a declaration keyword, found {tok.value or tok.kind!r}",
                self.span(tok), DECL_KEYWORDS)
        return getattr(self, f"parse_{tok.value}")()

    def parse_sensor(self) -> SensorDecl:
        start = self.expect("kw", "sensor")
        name = self.expect("ident").value
        self.expect("op", ":")
        unit = self.expect("string", what="unit string").value
        self.expect("op", "@")
        period = self.parse_period()
        self.expect("op", ";")
        return SensorDecl(name, unit, period, span=self.span(start))

    def parse_period(self) -> int:
        num = self.expect("number", what="period value")
        unit_tok = self.peek()
        if unit_tok.kind != "ident" or unit_tok.value not in PERIOD_UNITS:
            raise ParseError(
                f"expected a period unit, found {unit_tok.value or unit_tok.kind!r}",
                self.span(unit_tok), tuple(PERIOD_UNITS))
        self.advance()
        seconds = float(num.value) * PERIOD_UNITS[unit_tok.value]
        if seconds < 1 or seconds != int(seconds):
            raise ParseError("period must be a whole number of seconds >= 1",
                             self.span(num))
        return int(seconds)

    def parse_params(self) -> list:
        self.expect("op", "(")
        params: list[str] = []
        if not self.at("op", ")"):
            params.append(self.expect("ident", what="parameter name").value)
            while self.accept("op", ","):
                params.append(self.expect("ident", what="parameter name").value)
        self.expect("op", ")")
        if len(set(params)) != len(params):
            raise self.fail("duplicate parameter name")
        return params

    def parse_function(self) -> FunctionDecl:
        start = self.expect("kw", "function")
        name = self.expect("ident").value
        params = self.parse_params()
        self.expect("op", "=")
        body = self.parse_expr()
        self.expect("op", ";")
        return FunctionDecl(name, params, body, span=self.span(start))

    def parse_rule(self) -> RuleDecl:
        start = self.expect("kw", "rule")
        name = self.expect("ident").value
        params = self.parse_params()
        when = None
        if self.accept("kw", "when"):
            when = self.expect("ident", what="time routine name").value
        self.expect("op", "=")
        body = self.parse_expr()
        self.expect("op", ";")
        return RuleDecl(name, params, body, when=when, span=self.span(start))

    def parse_characteristic(self) -> CharacteristicDecl:
        start = self.expect("kw", "characteristic")
        name = self.expect("ident").value
        self.expect("op", "(")
        x_param = self.expect("ident", what="x parameter").value
        y_param = None
        if self.accept("op", ","):
            y_param = self.expect("ident", what="y parameter").value
        self.expect("op", ")")
        lower = upper = None
        if self.accept("kw", "lower"):
            lower = self.parse_points()
        if self.accept("kw", "upper"):
            upper = self.parse_points()
        self.expect("op", ";")
        decl = CharacteristicDecl(name, x_param, y_param, lower, upper, span=self.span(start))
        if lower is None and upper is None:
            self.error(decl.span, "BadCharacteristic",
                       f"characteristic '{name}' needs a lower and/or upper point list")
        if y_param is None and lower is not None and upper is not None:
            self.error(decl.span, "BadCharacteristic",
                       f"characteristic '{name}' in function form takes a single curve, not both bounds")
        if x_param == y_param:
            self.error(decl.span, "BadCharacteristic", "x and y parameters must differ")
        return decl

    def parse_points(self) -> tuple:
        self.expect("op", "[")
        points = [self.parse_point()]
        while self.accept("op", ","):
            points.append(self.parse_point())
        close = self.expect("op", "]")
        if len(points) < 2:
            self.error(self.span(close), "BadCharacteristic", "point list needs at least 2 points")
        xs = [x for x, _ in points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            self.error(self.span(close), "BadCharacteristic",
                       "point list must be strictly increasing in x")
        return tuple(points)

    def parse_point(self) -> tuple:
        self.expect("op", "(")
        x = self.parse_signed_number()
        self.expect("op", ",")
        y = self.parse_signed_number()
        self.expect("op", ")")
        return (x, y)

    def parse_signed_number(self) -> float:
        sign = -1.0 if self.accept("op", "-") else 1.0
        return sign * float(self.expect("number").value)

    def parse_metric(self) -> MetricDecl:
        start = self.expect("kw", "metric")
        name = self.expect("ident").value
        self.expect("op", "=")
        base_fn = self.expect("ident", what="base function").value
        self.expect("op", "(")
        context = self.expect("ident", what="context sensor or function").value
        self.expect("op", ")")
        self.expect("kw", "per")
        quant_tok = self.peek()
        if quant_tok.kind != "ident" or quant_tok.value not in QUANTIZATIONS:
            raise ParseError(
                f"expected a quantization, found {quant_tok.value or quant_tok.kind!r}",
                self.span(quant_tok), QUANTIZATIONS)
        self.advance()
        coverage = 0.9
        if self.accept("kw", "coverage"):
            tok = self.expect("number", what="coverage threshold")
            coverage = float(tok.value)
            if not 0.0 <= coverage <= 1.0:
                self.error(self.span(tok), "BadMetric", "coverage must be within [0, 1]")
        self.expect("op", ";")
        return MetricDecl(name, base_fn, context, quant_tok.value, coverage, span=self.span(start))

    def parse_timeroutine(self) -> TimeRoutineDecl:
        start = self.expect("kw", "timeroutine")
        name = self.expect("ident").value
        self.expect("op", "=")
        self.expect("op", "{")
        ranges = []
        if not self.at("op", "}"):
            ranges.append(self.parse_range())
            while self.at("op", ","):
                self.advance()
                ranges.append(self.parse_range())
        self.expect("op", "}")
        includes, excludes = [], []
        if self.accept("kw", "include"):
            includes = self.parse_idlist()
        if self.accept("kw", "exclude"):
            excludes = self.parse_idlist()
        self.expect("op", ";")
        return TimeRoutineDecl(name, ranges, includes, excludes, span=self.span(start))

    def parse_idlist(self) -> list:
        names = [self.expect("ident", what="routine name").value]
        while self.accept("op", ","):
            names.append(self.expect("ident", what="routine name").value)
        return names

    def parse_range(self) -> dict:
        fields: dict[str, frozenset] = {}
        while True:
            tok = self.peek()
            if tok.kind != "ident" or tok.value not in TIME_FIELDS:
                if fields:
                    break
                raise ParseError(
                    f"expected a time field, found {tok.value or tok.kind!r}",
                    self.span(tok), TIME_FIELDS)
            field_name = self.advance().value
            if field_name in fields:
                self.error(self.span(tok), "BadTimeRoutine",
                           f"field '{field_name}' repeated within one range")
            fields[field_name] = self.parse_field_values(field_name)
        return fields

    def parse_field_values(self, field_name: str) -> frozenset:
        values = set(self.parse_field_item(field_name))
        # a comma continues this value list unless a time field follows it,
        # which starts the next range of the routine
        while self.at("op", ",") and not (
                self.peek(1).kind == "ident" and self.peek(1).value in TIME_FIELDS):
            self.advance()
            values.update(self.parse_field_item(field_name))
        return frozenset(values)

    def parse_field_item(self, field_name: str) -> list:
        lo = self.parse_field_value(field_name)
        if self.accept("op", ".."):
            hi = self.parse_field_value(field_name)
            lo_b, hi_b = FIELD_BOUNDS[field_name]
            if lo <= hi:
                return list(range(lo, hi + 1))
            # wrap-around span, e.g. hour 22..5 or weekday Sat..Sun
            return list(range(lo, hi_b + 1)) + list(range(lo_b, hi + 1))
        return [lo]

    def parse_field_value(self, field_name: str) -> int:
        tok = self.peek()
        if field_name == "weekday":
            if tok.kind == "ident" and tok.value in WEEKDAY_NAMES:
                self.advance()
                return WEEKDAY_NAMES.index(tok.value)
            raise ParseError(
                f"expected a weekday name, found {tok.value or tok.kind!r}",
                self.span(tok), WEEKDAY_NAMES)
        num = self.expect("number", what=f"{field_name} value")
        value = float(num.value)
        lo, hi = FIELD_BOUNDS[field_name]
        if value != int(value) or not lo <= int(value) <= hi:
            self.error(self.span(num), "BadTimeRoutine",
                       f"{field_name} value {num.value} outside {lo}..{hi}")
            return lo
        return int(value)

    def parse_apply(self) -> ApplyDecl:
        start = self.expect("kw", "apply")
        template = self.expect("ident", what="template name").value
        self.expect("kw", "as")
        instance = self.expect("ident", what="instance name").value
        self.expect("kw", "with")
        self.expect("op", "(")
        binding: dict[str, str] = {}
        if not self.at("op", ")"):
            self.parse_bind(binding)
            while self.accept("op", ","):
                self.parse_bind(binding)
        self.expect("op", ")")
        self.expect("op", ";")
        return ApplyDecl(instance, template, binding, span=self.span(start))

    def parse_bind(self, binding: dict) -> None:
        formal = self.expect("ident", what="formal parameter").value
        self.expect("op", "=")
        concrete = self.expect("ident", what="sensor name").value
        if formal in binding:
            self.error(self.peek().span(self.filename), "BadBinding",
                       f"formal '{formal}' bound twice")
        binding[formal] = concrete

    def error(self, span: Span, code: str, message: str) -> None:
        self.diagnostics.append(Diagnostic("error", code, message, span))

    # expressions

    def parse_expr(self):
        if self.at("kw", "if"):
            return self.parse_if()
        return self.parse_implies()

    def parse_if(self) -> IfExpr:
        start = self.expect("kw", "if")
        cond = self.parse_expr()
        self.expect("kw", "then")
        then = self.parse_expr()
        self.expect("kw", "else")
        orelse = self.parse_expr()
        return IfExpr(cond, then, orelse, span=self.span(start))

    def parse_implies(self):
        left = self.parse_or()
        while self.at("kw", "implies"):
            tok = self.advance()
            left = Binary("implies", left, self.parse_or(), span=self.span(tok))
        return left

    def parse_or(self):
        left = self.parse_and()
        while self.at("kw", "or"):
            tok = self.advance()
            left = Binary("or", left, self.parse_and(), span=self.span(tok))
        return left

    def parse_and(self):
        left = self.parse_comparison()
        while self.at("kw", "and"):
            tok = self.advance()
            left = Binary("and", left, self.parse_comparison(), span=self.span(tok))
        return left

    def parse_comparison(self):
        left = self.parse_additive()
        while self.peek().kind == "op" and self.peek().value in ("<", "<=", ">", ">=", "==", "!="):
            tok = self.advance()
            left = Binary(tok.value, left, self.parse_additive(), span=self.span(tok))
        return left

    def parse_additive(self):
        left = self.parse_multiplicative()
        while self.peek().kind == "op" and self.peek().value in ("+", "-"):
            tok = self.advance()
            left = Binary(tok.value, left, self.parse_multiplicative(), span=self.span(tok))
        return left

    def parse_multiplicative(self):
        left = self.parse_unary()
        while self.peek().kind == "op" and self.peek().value in ("*", "/"):
            tok = self.advance()
            left = Binary(tok.value, left, self.parse_unary(), span=self.span(tok))
        return left

    def parse_unary(self):
        if self.at("kw", "not"):
            tok = self.advance()
            return Unary("not", self.parse_unary(), span=self.span(tok))
        if self.at("op", "-"):
            tok = self.advance()
            return Unary("-", self.parse_unary(), span=self.span(tok))
        return self.parse_primary()

    def parse_primary(self):
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            unit = None
            if self.at("string"):
                unit = self.advance().value
            return Literal(float(tok.value), unit, span=self.span(tok))
        if tok.kind == "ident":
            self.advance()
            if self.at("op", "("):
                self.advance()
                args = []
                if not self.at("op", ")"):
                    args.append(self.parse_expr())
                    while self.accept("op", ","):
                        args.append(self.parse_expr())
                self.expect("op", ")")
                return Call(tok.value, args, span=self.span(tok))
            return Ref(tok.value, span=self.span(tok))
        if tok.kind == "op" and tok.value == "(":
            self.advance()
            inner = self.parse_expr()
            self.expect("op", ")")
            return inner
        if tok.kind == "kw" and tok.value == "if":
            return self.parse_if()
        raise ParseError(
            f"expected an expression, found {tok.value or tok.kind!r}",
            self.span(tok), ("number", "identifier", "(", "if", "not", "-"))
