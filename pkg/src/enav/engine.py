"""Pointwise evaluation of typed artifacts over series.

Every artifact evaluates slot by slot on the context grid and produces a
virtual sensor with exactly that grid (ids ``rule:<name>`` / ``fn:<name>``).
Numeric propagation: an UNDEFINED operand poisons the result, otherwise a
MISSING operand does; division by zero yields UNDEFINED. Boolean
connectives follow the four-valued tables in :mod:`enav.fourvalued`.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import fourvalued as fv
from .fourvalued import BoolValue
from .lang.ast import (
    Binary, Call, CharacteristicDecl, FunctionDecl, IfExpr, Literal,
    MetricDecl, Ref, RuleDecl, SpecModel, TimeRoutineDecl, Unary,
)
from .lang.printer import format_expr
from .routines import routine_mask
from .timeseries import (
    GridMismatch, KindMismatch, Quality, Series, SeriesKind, TimeGrid,
)


@dataclass
class NumericValue:
    """Vector of numeric samples: values + quality codes."""

    values: np.ndarray  # float64, NaN where not VALID
    quality: np.ndarray  # uint8 Quality


@dataclass
class BoolCodes:
    """Vector of four-valued samples as BoolValue codes."""

    codes: np.ndarray  # uint8 BoolValue


@dataclass
class EvalContext:
    """Everything an evaluation needs: bound series on one common grid."""

    binding: dict  # name (formal or sensor id) -> Series
    grid: TimeGrid
    timezone: str = "UTC"
    routines: dict = dc_field(default_factory=dict)  # name -> TimeRoutineDecl
    model: SpecModel | None = None
    eps: float = 0.0
    capture: dict | None = None  # populated with sub-expression series when debugging

    def __post_init__(self) -> None:
        for name, series in self.binding.items():
            if series.grid != self.grid:
                raise GridMismatch(
                    f"series '{name}' grid {series.grid} differs from context grid {self.grid}")

    def numeric(self, name: str) -> NumericValue:
        series = self.binding[name]
        if series.kind != SeriesKind.NUMERIC:
            raise KindMismatch(f"series '{name}' is not numeric")
        return NumericValue(series.values, series.quality)


def _propagated_quality(*operands: NumericValue) -> np.ndarray:
    """UNDEFINED dominates, then MISSING; elementwise max of quality codes."""
    out = operands[0].quality
    for other in operands[1:]:
        out = np.maximum(out, other.quality)
    return out.copy()


def _arith(op: str, a: NumericValue, b: NumericValue) -> NumericValue:
    quality = _propagated_quality(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        if op == "+":
            values = a.values + b.values
        elif op == "-":
            values = a.values - b.values
        elif op == "*":
            values = a.values * b.values
        else:
            values = a.values / b.values
            div0 = (quality == Quality.VALID) & (b.values == 0.0)
            quality[div0] = Quality.UNDEFINED
    values = np.where(quality == Quality.VALID, values, np.nan)
    return NumericValue(values, quality)


def _compare(op: str, a: NumericValue, b: NumericValue, eps: float) -> BoolCodes:
    quality = _propagated_quality(a, b)
    with np.errstate(invalid="ignore"):
        if op == "<":
            truth = a.values < b.values
        elif op == "<=":
            truth = a.values <= b.values
        elif op == ">":
            truth = a.values > b.values
        elif op == ">=":
            truth = a.values >= b.values
        elif op == "==":
            truth = np.abs(a.values - b.values) <= eps
        else:
            truth = np.abs(a.values - b.values) > eps
    codes = np.where(truth, BoolValue.TRUE, BoolValue.FALSE).astype(np.uint8)
    codes[quality == Quality.MISSING] = BoolValue.MISSING
    codes[quality == Quality.UNDEFINED] = BoolValue.UNDEFINED
    return BoolCodes(codes)


_BUILTIN_COMBINE = {
    "MIN": np.minimum, "MINIMUM": np.minimum,
    "MAX": np.maximum, "MAXIMUM": np.maximum,
    "SUM": np.add, "AVERAGE": np.add,
}


def _builtin(name: str, args: list) -> NumericValue:
    if name == "ABS":
        (a,) = args
        return NumericValue(np.abs(a.values), a.quality.copy())
    quality = _propagated_quality(*args)
    acc = args[0].values
    combine = _BUILTIN_COMBINE[name]
    for other in args[1:]:
        acc = combine(acc, other.values)
    if name == "AVERAGE":
        acc = acc / len(args)
    acc = np.where(quality == Quality.VALID, acc, np.nan)
    return NumericValue(acc, quality)


class Evaluator:
    def __init__(self, ctx: EvalContext):
        self.ctx = ctx
        self.model = ctx.model or SpecModel()
        self._ref_cache: dict = {}
        self._env: dict | None = None  # callee parameter scope

    def eval(self, expr):
        result = self._eval(expr)
        if self.ctx.capture is not None and not isinstance(expr, (Literal, Ref)):
            self.ctx.capture[format_expr(expr)] = self._to_series("expr", result)
        return result

    def _to_series(self, name: str, result) -> Series:
        if isinstance(result, BoolCodes):
            return fv.series_from_codes(name, self.ctx.grid, result.codes)
        values = np.where(result.quality == Quality.VALID, result.values, np.nan)
        return Series(name, self.ctx.grid, values, result.quality)

    def _eval(self, expr):
        if isinstance(expr, Literal):
            n = self.ctx.grid.count
            return NumericValue(np.full(n, expr.value),
                                np.zeros(n, dtype=np.uint8))
        if isinstance(expr, Ref):
            target = expr.target or ("param", expr.name)
            if target[0] == "param":
                if self._env is not None:
                    return self._env[expr.name]
                return self.ctx.numeric(expr.name)
            if target[0] == "sensor":
                return self.ctx.numeric(expr.name)
            return self._eval_artifact_value(target[1])
        if isinstance(expr, Call):
            target = expr.target or ("builtin", expr.name)
            args = [self.eval(a) for a in expr.args]
            if target[0] == "builtin":
                return _builtin(expr.name, args)
            return self._call_artifact(self.model.artifacts[target[1]], args)
        if isinstance(expr, Unary):
            operand = self.eval(expr.operand)
            if expr.op == "not":
                return BoolCodes(fv.not_(operand.codes))
            values = np.where(operand.quality == Quality.VALID, -operand.values, np.nan)
            return NumericValue(values, operand.quality.copy())
        if isinstance(expr, Binary):
            left = self.eval(expr.left)
            right = self.eval(expr.right)
            if expr.op in ("and", "or", "implies"):
                fn = {"and": fv.and_, "or": fv.or_, "implies": fv.implies}[expr.op]
                return BoolCodes(fn(left.codes, right.codes))
            if expr.op in ("+", "-", "*", "/"):
                return _arith(expr.op, left, right)
            return _compare(expr.op, left, right, self.ctx.eps)
        if isinstance(expr, IfExpr):
            cond = self.eval(expr.cond)
            then = self.eval(expr.then)
            orelse = self.eval(expr.orelse)
            return self._conditional(cond, then, orelse)
        raise TypeError(f"not an expression: {expr!r}")

    def _conditional(self, cond: BoolCodes, then, orelse):
        take_then = cond.codes == BoolValue.TRUE
        take_else = cond.codes == BoolValue.FALSE
        if isinstance(then, BoolCodes):
            codes = np.full(cond.codes.shape, BoolValue.MISSING, dtype=np.uint8)
            codes[take_then] = then.codes[take_then]
            codes[take_else] = orelse.codes[take_else]
            codes[cond.codes == BoolValue.UNDEFINED] = BoolValue.UNDEFINED
            return BoolCodes(codes)
        quality = np.full(cond.codes.shape, Quality.MISSING, dtype=np.uint8)
        values = np.full(cond.codes.shape, np.nan)
        quality[take_then] = then.quality[take_then]
        values[take_then] = then.values[take_then]
        quality[take_else] = orelse.quality[take_else]
        values[take_else] = orelse.values[take_else]
        quality[cond.codes == BoolValue.UNDEFINED] = Quality.UNDEFINED
        values[quality != Quality.VALID] = np.nan
        return NumericValue(values, quality)

    def _eval_artifact_value(self, name: str):
        """Zero-argument artifact reference (memoized per evaluation)."""
        if name in self._ref_cache:
            return self._ref_cache[name]
        artifact = self.model.artifacts.get(name)
        from .lang.ast import ApplyDecl

        if isinstance(artifact, ApplyDecl):
            artifact = self.model.instances[name]
        result = self._call_artifact(artifact, [])
        self._ref_cache[name] = result
        return result

    def _call_artifact(self, artifact, args: list):
        if isinstance(artifact, CharacteristicDecl):
            return self._characteristic(artifact, args)
        # a callee body sees only its own parameters (plus artifacts), so
        # substitution-style capture is impossible by construction
        saved = self._env
        self._env = dict(zip(artifact.params, args))
        try:
            result = self.eval(artifact.body)
        finally:
            self._env = saved
        if isinstance(artifact, RuleDecl) and artifact.when:
            result = self._apply_when(artifact.when, result)
        return result

    def _routine_registry(self) -> dict:
        registry = {name: art for name, art in self.model.artifacts.items()
                    if isinstance(art, TimeRoutineDecl)}
        registry.update(self.ctx.routines)
        return registry

    def _apply_when(self, routine_name: str, result: BoolCodes) -> BoolCodes:
        registry = self._routine_registry()
        mask = routine_mask(registry[routine_name], self.ctx.grid, self.ctx.timezone, registry)
        codes = result.codes.copy()
        codes[~mask] = BoolValue.TRUE  # outside its routine a rule is not applicable
        return BoolCodes(codes)

    def _characteristic(self, ch: CharacteristicDecl, args: list):
        if args:
            x = args[0]
            y = args[1] if len(args) > 1 else None
        else:
            x = self.ctx.numeric(ch.x_param)
            y = self.ctx.numeric(ch.y_param) if ch.y_param else None
        if ch.y_param is None:
            curve = ch.lower if ch.lower is not None else ch.upper
            values, quality = _interp_curve(curve, x)
            return NumericValue(values, quality)
        eps = self.ctx.eps
        codes = np.full(x.values.shape, BoolValue.TRUE, dtype=np.uint8)
        quality = _propagated_quality(x, y)
        for curve, is_lower in ((ch.lower, True), (ch.upper, False)):
            if curve is None:
                continue
            bound, bq = _interp_curve(curve, x)
            quality = np.maximum(quality, bq)
            with np.errstate(invalid="ignore"):
                ok = (y.values >= bound - eps) if is_lower else (y.values <= bound + eps)
            codes[~ok] = BoolValue.FALSE
        codes[quality == Quality.MISSING] = BoolValue.MISSING
        codes[quality == Quality.UNDEFINED] = BoolValue.UNDEFINED
        return BoolCodes(codes)


def _interp_curve(points, x: NumericValue) -> tuple[np.ndarray, np.ndarray]:
    """Piecewise-linear lookup; x outside the point domain is UNDEFINED."""
    xs = np.array([p[0] for p in points])
    ys = np.array([p[1] for p in points])
    with np.errstate(invalid="ignore"):
        values = np.interp(x.values, xs, ys)
        out_of_domain = (x.values < xs[0]) | (x.values > xs[-1])
    quality = x.quality.copy()
    valid = quality == Quality.VALID
    quality[valid & out_of_domain] = Quality.UNDEFINED
    values = np.where(quality == Quality.VALID, values, np.nan)
    return values, quality


def eval_function(fn: FunctionDecl, ctx: EvalContext) -> Series:
    """Numeric virtual sensor ``fn:<name>`` on the context grid."""
    result = Evaluator(ctx).eval(fn.body)
    if isinstance(result, BoolCodes):
        raise KindMismatch(f"function '{fn.name}' produced a boolean result")
    values = np.where(result.quality == Quality.VALID, result.values, np.nan)
    return Series(f"fn:{fn.name}", ctx.grid, values, result.quality)


def eval_rule(rule: RuleDecl, ctx: EvalContext) -> Series:
    """Four-valued virtual sensor ``rule:<name>`` on the context grid."""
    evaluator = Evaluator(ctx)
    result = evaluator.eval(rule.body)
    if isinstance(result, NumericValue):
        raise KindMismatch(f"rule '{rule.name}' produced a numeric result")
    if rule.when:
        result = evaluator._apply_when(rule.when, result)
    return fv.series_from_codes(f"rule:{rule.name}", ctx.grid, result.codes)


def eval_characteristic(ch: CharacteristicDecl, ctx: EvalContext) -> Series:
    """Rule form: four-valued bound check; function form: curve lookup."""
    result = Evaluator(ctx)._characteristic(ch, [])
    if isinstance(result, BoolCodes):
        return fv.series_from_codes(f"rule:{ch.name}", ctx.grid, result.codes)
    values = np.where(result.quality == Quality.VALID, result.values, np.nan)
    return Series(f"fn:{ch.name}", ctx.grid, values, result.quality)
