"""Type checking: every expression is NUMERIC or BOOLEAN.

Rule bodies must be BOOLEAN, function bodies NUMERIC; comparisons take
numeric operands; IF-THEN-ELSE needs a boolean condition and branches of
one common type. Unit strings ride along uninterpreted -- comparing values
with differing known units produces a warning, never an error.
"""

from __future__ import annotations

from .ast import (
    ApplyDecl, Binary, Call, CharacteristicDecl, Diagnostic, FunctionDecl,
    IfExpr, Literal, MetricDecl, Ref, RuleDecl, SpecModel, TimeRoutineDecl,
    Unary, value_kind,
)

NUMERIC = "numeric"
BOOLEAN = "boolean"
ERROR = "error"  # poisoned subtree; suppresses cascading diagnostics


def artifact_value_kind(model: SpecModel, name: str):
    artifact = model.artifacts.get(name)
    if isinstance(artifact, ApplyDecl):
        return artifact_value_kind(model, artifact.template)
    return value_kind(artifact) if artifact is not None else None


def typecheck(model: SpecModel) -> SpecModel:
    """Annotate expression types in place; append diagnostics to the model."""
    checker = _Checker(model)
    for name in sorted(model.artifacts):
        checker.check_artifact(model.artifacts[name])
    for name in sorted(model.instances):
        checker.check_artifact(model.instances[name])
    return model


class _Checker:
    def __init__(self, model: SpecModel):
        self.model = model
        self.diags = model.diagnostics

    def mismatch(self, span, expected: str, found: str, what: str) -> str:
        if found != ERROR:
            self.diags.append(Diagnostic(
                "error", "TypeMismatch",
                f"{what}: expected {expected.upper()}, found {found.upper()}", span))
        return ERROR

    def check_artifact(self, artifact) -> None:
        if isinstance(artifact, FunctionDecl):
            ty, _ = self.infer(artifact.body)
            if ty == BOOLEAN:
                self.mismatch(artifact.span, NUMERIC, ty, f"body of function '{artifact.name}'")
        elif isinstance(artifact, RuleDecl):
            ty, _ = self.infer(artifact.body)
            if ty == NUMERIC:
                self.mismatch(artifact.span, BOOLEAN, ty, f"body of rule '{artifact.name}'")
        elif isinstance(artifact, MetricDecl):
            self.check_metric(artifact)

    def check_metric(self, metric: MetricDecl) -> None:
        target = metric.context_target
        if target is None:
            return
        if target[0] == "sensor":
            return
        artifact = self.model.artifacts.get(metric.context)
        kind = artifact_value_kind(self.model, metric.context)
        if kind == BOOLEAN:
            self.mismatch(metric.span, NUMERIC, BOOLEAN, f"context of metric '{metric.name}'")
            return
        if kind is None:
            self.diags.append(Diagnostic(
                "error", "TypeMismatch",
                f"context of metric '{metric.name}' must be a sensor or a numeric artifact",
                metric.span))
            return
        from .ast import artifact_params
        if not isinstance(artifact, ApplyDecl) and artifact_params(artifact):
            self.diags.append(Diagnostic(
                "error", "TypeMismatch",
                f"context of metric '{metric.name}' must be concrete "
                f"('{metric.context}' still has unbound parameters)", metric.span))

    # returns (type, unit)
    def infer(self, expr):
        ty, unit = self._infer(expr)
        expr.ty = ty
        return ty, unit

    def _infer(self, expr):
        if isinstance(expr, Literal):
            return NUMERIC, expr.unit
        if isinstance(expr, Ref):
            if expr.target is None:
                return ERROR, None
            kind, name = expr.target
            if kind == "param":
                return NUMERIC, None
            if kind == "sensor":
                sensor = self.model.sensors.get(name)
                return NUMERIC, sensor.unit if sensor else None
            vk = artifact_value_kind(self.model, name)
            if vk is None:
                artifact = self.model.artifacts.get(name)
                what = type(artifact).__name__.replace("Decl", "").lower()
                self.diags.append(Diagnostic(
                    "error", "TypeMismatch",
                    f"{what} '{name}' cannot be used inside an expression", expr.span))
                return ERROR, None
            return vk, None
        if isinstance(expr, Call):
            arg_types = [self.infer(a) for a in expr.args]
            if expr.target is None:
                return ERROR, None
            for arg, (aty, _) in zip(expr.args, arg_types):
                if aty == BOOLEAN:
                    self.mismatch(arg.span, NUMERIC, aty, f"argument of '{expr.name}'")
            if expr.target[0] == "builtin":
                return NUMERIC, None
            artifact = self.model.artifacts.get(expr.target[1])
            return value_kind(artifact) or ERROR, None
        if isinstance(expr, Unary):
            ty, unit = self.infer(expr.operand)
            if expr.op == "not":
                if ty == NUMERIC:
                    return self.mismatch(expr.span, BOOLEAN, ty, "operand of 'not'"), None
                return (BOOLEAN if ty == BOOLEAN else ERROR), None
            if ty == BOOLEAN:
                return self.mismatch(expr.span, NUMERIC, ty, "operand of unary '-'"), None
            return (NUMERIC if ty == NUMERIC else ERROR), unit
        if isinstance(expr, Binary):
            lty, lunit = self.infer(expr.left)
            rty, runit = self.infer(expr.right)
            if expr.op in ("and", "or", "implies"):
                out = BOOLEAN
                for ty, side in ((lty, expr.left), (rty, expr.right)):
                    if ty == NUMERIC:
                        out = self.mismatch(side.span, BOOLEAN, ty, f"operand of '{expr.op}'")
                    elif ty == ERROR:
                        out = ERROR
                return out, None
            # arithmetic and comparisons want numeric operands
            out_ok = True
            for ty, side in ((lty, expr.left), (rty, expr.right)):
                if ty == BOOLEAN:
                    self.mismatch(side.span, NUMERIC, ty, f"operand of '{expr.op}'")
                    out_ok = False
                elif ty == ERROR:
                    out_ok = False
            if expr.op in ("+", "-", "*", "/"):
                unit = lunit if lunit == runit else None
                return (NUMERIC if out_ok else ERROR), unit
            if lunit is not None and runit is not None and lunit != runit:
                self.diags.append(Diagnostic(
                    "warning", "UnitMismatch",
                    f"comparing values with differing units '{lunit}' and '{runit}'",
                    expr.span))
            return (BOOLEAN if out_ok else ERROR), None
        if isinstance(expr, IfExpr):
            cty, _ = self.infer(expr.cond)
            if cty == NUMERIC:
                self.mismatch(expr.cond.span, BOOLEAN, cty, "condition of 'if'")
            tty, tunit = self.infer(expr.then)
            ety, eunit = self.infer(expr.orelse)
            if ERROR in (tty, ety) or cty == ERROR:
                return ERROR, None
            if tty != ety:
                return self.mismatch(expr.span, tty, ety, "'else' branch of 'if'"), None
            return tty, tunit if tunit == eunit else None
        raise TypeError(f"not an expression: {expr!r}")
