"""Reference resolution, duplicate/cycle detection, template instantiation.

Declarations are self-contained: an expression may name its own formal
parameters, call other artifacts, or call builtins -- never a sensor
directly. Sensors enter through `apply` bindings (and through metric
contexts), which keeps every rule/function reusable as a template.
"""

from __future__ import annotations

from dataclasses import replace

from .ast import (
    ApplyDecl, Binary, Call, CharacteristicDecl, Diagnostic, FunctionDecl,
    IfExpr, Literal, MetricDecl, Ref, RuleDecl, SensorDecl, SpecModel,
    TimeRoutineDecl, Unary, artifact_params, walk_expr,
)

# Pointwise builtins usable in expressions. ABS is unary; the rest take any
# number of numeric arguments and combine them per timestamp.
BUILTIN_FUNCS = {
    "ABS": (1, 1),
    "MIN": (1, None), "MAX": (1, None),
    "MINIMUM": (1, None), "MAXIMUM": (1, None),
    "AVERAGE": (1, None), "SUM": (1, None),
}

# Base functions accepted in metric declarations; STDDEV is the
# library-provided sample standard deviation (n-1 denominator).
METRIC_BASE_FNS = ("AVERAGE", "MINIMUM", "MAXIMUM", "SUM", "COUNT", "STDDEV")


class IncompleteBinding(Exception):
    pass


class PeriodMismatch(Exception):
    pass


def resolve(fragments, library: SpecModel | None = None) -> SpecModel:
    """Merge parsed fragments over an optional library into one model.

    Workspace declarations shadow library declarations of the same name
    (with a warning); duplicate workspace names, unresolved references and
    reference cycles are reported as error diagnostics.
    """
    model = SpecModel()
    diags = model.diagnostics

    def declare(decl, table: dict, kind: str) -> None:
        if decl.name in table:
            prev = table[decl.name]
            ref = f" (first declared at {prev.span})" if getattr(prev, "span", None) else ""
            diags.append(Diagnostic("error", "DuplicateDefinition",
                                    f"duplicate {kind} '{decl.name}'{ref}", decl.span))
            return
        table[decl.name] = decl

    for fragment in fragments:
        decls = fragment.decls if hasattr(fragment, "decls") else fragment
        for decl in decls:
            if isinstance(decl, SensorDecl):
                declare(decl, model.sensors, "sensor")
            else:
                declare(decl, model.artifacts, "artifact")

    if library is not None:
        for name, decl in library.sensors.items():
            if name in model.sensors:
                diags.append(Diagnostic("warning", "Shadowing",
                                        f"workspace sensor '{name}' shadows library sensor",
                                        model.sensors[name].span))
            else:
                model.sensors[name] = decl
        for name, decl in library.artifacts.items():
            if name in model.artifacts:
                diags.append(Diagnostic("warning", "Shadowing",
                                        f"workspace '{name}' shadows library artifact",
                                        model.artifacts[name].span))
            else:
                model.artifacts[name] = decl

    for name in sorted(model.artifacts):
        _resolve_artifact(model, model.artifacts[name])

    _detect_cycles(model)
    return model


def _resolve_expr(model: SpecModel, expr, params: set, diags: list) -> None:
    for node in walk_expr(expr):
        if isinstance(node, Ref):
            if node.target is not None:
                continue  # already bound (instantiated sensor ref)
            if node.name in params:
                node.target = ("param", node.name)
            elif node.name in model.artifacts:
                target = model.artifacts[node.name]
                arity = len(artifact_params(target))
                if arity:
                    diags.append(Diagnostic(
                        "error", "UnresolvedReference",
                        f"'{node.name}' expects {arity} argument(s)", node.span))
                else:
                    node.target = ("artifact", node.name)
            elif node.name in model.sensors:
                diags.append(Diagnostic(
                    "error", "FreeSensorReference",
                    f"sensor '{node.name}' cannot be referenced directly; "
                    "bind it through a parameter via 'apply'", node.span))
            elif node.name in BUILTIN_FUNCS:
                diags.append(Diagnostic("error", "UnresolvedReference",
                                        f"builtin '{node.name}' must be called", node.span))
            else:
                diags.append(Diagnostic("error", "UnresolvedReference",
                                        f"unknown name '{node.name}'", node.span))
        elif isinstance(node, Call):
            if node.name in params:
                diags.append(Diagnostic("error", "UnresolvedReference",
                                        f"parameter '{node.name}' is not callable", node.span))
            elif node.name in model.artifacts:
                target = model.artifacts[node.name]
                if isinstance(target, (FunctionDecl, RuleDecl, CharacteristicDecl)):
                    arity = len(artifact_params(target))
                    if len(node.args) != arity:
                        diags.append(Diagnostic(
                            "error", "UnresolvedReference",
                            f"'{node.name}' expects {arity} argument(s), got {len(node.args)}",
                            node.span))
                    else:
                        node.target = ("artifact", node.name)
                else:
                    diags.append(Diagnostic(
                        "error", "UnresolvedReference",
                        f"'{node.name}' is not callable in an expression", node.span))
            elif node.name in BUILTIN_FUNCS:
                lo, hi = BUILTIN_FUNCS[node.name]
                if len(node.args) < lo or (hi is not None and len(node.args) > hi):
                    diags.append(Diagnostic(
                        "error", "UnresolvedReference",
                        f"builtin '{node.name}' takes "
                        f"{'exactly ' + str(lo) if hi == lo else 'at least ' + str(lo)} argument(s)",
                        node.span))
                else:
                    node.target = ("builtin", node.name)
            else:
                diags.append(Diagnostic("error", "UnresolvedReference",
                                        f"unknown name '{node.name}'", node.span))


def _resolve_artifact(model: SpecModel, artifact) -> None:
    diags = model.diagnostics
    if isinstance(artifact, (FunctionDecl, RuleDecl)):
        _resolve_expr(model, artifact.body, set(artifact.params), diags)
        when = getattr(artifact, "when", None)
        if when is not None and not isinstance(model.artifacts.get(when), TimeRoutineDecl):
            diags.append(Diagnostic("error", "UnresolvedReference",
                                    f"'when {when}' does not name a time routine",
                                    artifact.span))
    elif isinstance(artifact, MetricDecl):
        if artifact.base_fn not in METRIC_BASE_FNS:
            diags.append(Diagnostic(
                "error", "UnresolvedReference",
                f"unknown base function '{artifact.base_fn}' "
                f"(one of: {', '.join(METRIC_BASE_FNS)})", artifact.span))
        if artifact.context in model.sensors:
            artifact.context_target = ("sensor", artifact.context)
        elif artifact.context in model.artifacts:
            artifact.context_target = ("artifact", artifact.context)
        else:
            diags.append(Diagnostic("error", "UnresolvedReference",
                                    f"unknown metric context '{artifact.context}'",
                                    artifact.span))
    elif isinstance(artifact, TimeRoutineDecl):
        for name in artifact.includes + artifact.excludes:
            if not isinstance(model.artifacts.get(name), TimeRoutineDecl):
                diags.append(Diagnostic("error", "UnresolvedReference",
                                        f"'{name}' does not name a time routine",
                                        artifact.span))
    elif isinstance(artifact, ApplyDecl):
        template = model.artifacts.get(artifact.template)
        if template is None or isinstance(template, ApplyDecl):
            diags.append(Diagnostic("error", "UnresolvedReference",
                                    f"unknown template '{artifact.template}'", artifact.span))
            return
        formals = set(artifact_params(template))
        for formal, concrete in artifact.binding.items():
            if formal not in formals:
                diags.append(Diagnostic("error", "UnresolvedReference",
                                        f"'{artifact.template}' has no parameter '{formal}'",
                                        artifact.span))
            if concrete not in model.sensors:
                diags.append(Diagnostic("error", "UnresolvedReference",
                                        f"unknown sensor '{concrete}'", artifact.span))


def references(artifact) -> list:
    """Ids of other artifacts this artifact depends on."""
    out = []
    if isinstance(artifact, (FunctionDecl, RuleDecl)):
        for node in walk_expr(artifact.body):
            if isinstance(node, (Ref, Call)) and node.target and node.target[0] == "artifact":
                out.append(node.target[1])
        if getattr(artifact, "when", None):
            out.append(artifact.when)
    elif isinstance(artifact, MetricDecl):
        if artifact.context_target and artifact.context_target[0] == "artifact":
            out.append(artifact.context)
    elif isinstance(artifact, TimeRoutineDecl):
        out.extend(artifact.includes)
        out.extend(artifact.excludes)
    elif isinstance(artifact, ApplyDecl):
        out.append(artifact.template)
    return out


def _detect_cycles(model: SpecModel) -> None:
    WHITE, GREY, BLACK = 0, 1, 2
    state = {name: WHITE for name in model.artifacts}
    reported = set()

    def visit(name: str, stack: list) -> None:
        state[name] = GREY
        stack.append(name)
        for dep in references(model.artifacts[name]):
            if dep not in model.artifacts:
                continue
            if state[dep] == GREY:
                cycle = stack[stack.index(dep):] + [dep]
                key = frozenset(cycle)
                if key not in reported:
                    reported.add(key)
                    model.diagnostics.append(Diagnostic(
                        "error", "CyclicReference",
                        "reference cycle: " + " -> ".join(cycle),
                        model.artifacts[dep].span))
            elif state[dep] == WHITE:
                visit(dep, stack)
        stack.pop()
        state[name] = BLACK

    for name in sorted(model.artifacts):
        if state[name] == WHITE:
            visit(name, [])


def _subst_expr(expr, mapping: dict, sensors: dict):
    """Capture-free substitution of formal parameters by sensor references."""
    if isinstance(expr, Literal):
        return replace(expr)
    if isinstance(expr, Ref):
        if expr.target == ("param", expr.name) and expr.name in mapping:
            sensor_id = mapping[expr.name]
            out = Ref(sensor_id, span=expr.span)
            out.target = ("sensor", sensor_id)
            return out
        out = replace(expr)
        out.target = expr.target
        return out
    if isinstance(expr, Call):
        out = Call(expr.name, [_subst_expr(a, mapping, sensors) for a in expr.args], span=expr.span)
        out.target = expr.target
        return out
    if isinstance(expr, Unary):
        return Unary(expr.op, _subst_expr(expr.operand, mapping, sensors), span=expr.span)
    if isinstance(expr, Binary):
        return Binary(expr.op, _subst_expr(expr.left, mapping, sensors),
                      _subst_expr(expr.right, mapping, sensors), span=expr.span)
    if isinstance(expr, IfExpr):
        return IfExpr(_subst_expr(expr.cond, mapping, sensors),
                      _subst_expr(expr.then, mapping, sensors),
                      _subst_expr(expr.orelse, mapping, sensors), span=expr.span)
    raise TypeError(f"not an expression: {expr!r}")


def instantiate(template, binding: dict, instance_id: str, sensors: dict):
    """Bind a template's formals to concrete sensors.

    Raises IncompleteBinding when a formal is unbound and PeriodMismatch
    when the bound sensors do not share one sampling period.
    """
    formals = artifact_params(template)
    missing = [f for f in formals if f not in binding]
    if missing:
        raise IncompleteBinding(
            f"binding for '{instance_id}' misses formal(s): {', '.join(missing)}")
    periods = {}
    for formal in formals:
        sensor = sensors.get(binding[formal])
        if sensor is not None:
            periods[binding[formal]] = sensor.period
    if len(set(periods.values())) > 1:
        detail = ", ".join(f"{s}@{p}s" for s, p in sorted(periods.items()))
        raise PeriodMismatch(f"instance '{instance_id}' binds sensors of differing periods: {detail}")

    provenance = (template.name, dict(binding))
    if isinstance(template, FunctionDecl):
        body = _subst_expr(template.body, binding, sensors)
        return FunctionDecl(instance_id, [], body, span=template.span, provenance=provenance)
    if isinstance(template, RuleDecl):
        body = _subst_expr(template.body, binding, sensors)
        return RuleDecl(instance_id, [], body, when=template.when,
                        span=template.span, provenance=provenance)
    if isinstance(template, CharacteristicDecl):
        return CharacteristicDecl(
            instance_id, binding[template.x_param],
            binding[template.y_param] if template.y_param else None,
            template.lower, template.upper, span=template.span, provenance=provenance)
    if isinstance(template, MetricDecl):
        out = replace(template, name=instance_id)
        out.provenance = provenance
        out.context_target = template.context_target
        return out
    if isinstance(template, TimeRoutineDecl):
        out = replace(template, name=instance_id)
        out.provenance = provenance
        return out
    raise TypeError(f"cannot instantiate {type(template).__name__}")
