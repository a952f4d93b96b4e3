"""The functional-specification language: parsing, analysis, printing."""

from __future__ import annotations

from pathlib import Path

from .ast import (  # noqa: F401
    ApplyDecl, Binary, Call, CharacteristicDecl, Diagnostic, Expr,
    FunctionDecl, IfExpr, Literal, MetricDecl, Ref, RuleDecl, SensorDecl,
    Span, SpecModel, TimeRoutineDecl, Unary, artifact_params, value_kind,
    walk_expr,
)
from .parser import ParseResult, parse  # noqa: F401
from .printer import format_decls, format_expr, format_model  # noqa: F401
from .resolve import (  # noqa: F401
    BUILTIN_FUNCS, METRIC_BASE_FNS, IncompleteBinding, PeriodMismatch,
    instantiate, resolve,
)
from .typecheck import artifact_value_kind, typecheck  # noqa: F401


def analyze(fragments, library: SpecModel | None = None) -> SpecModel:
    """Resolve, instantiate every apply, and type-check.

    Apply declarations that fail to instantiate (incomplete binding, period
    mismatch) become error diagnostics; the rest of the model is still
    analyzed, so one broken artifact never hides the others.
    """
    model = resolve(fragments, library)
    for name in sorted(model.artifacts):
        decl = model.artifacts[name]
        if not isinstance(decl, ApplyDecl):
            continue
        template = model.artifacts.get(decl.template)
        if template is None or isinstance(template, ApplyDecl):
            continue  # already reported by resolve
        try:
            model.instances[name] = instantiate(template, decl.binding, name, model.sensors)
        except (IncompleteBinding, PeriodMismatch) as exc:
            code = type(exc).__name__
            model.diagnostics.append(Diagnostic("error", code, str(exc), decl.span))
    typecheck(model)
    return model


def analyze_files(paths, library_paths=()) -> SpecModel:
    """Parse and analyze `.afs` files; I/O errors raise OSError."""
    def load(file_paths):
        fragments, diags = [], []
        for p in sorted(str(x) for x in file_paths):
            result = parse(Path(p).read_text(encoding="utf-8"), p)
            fragments.append(result)
            diags.extend(result.diagnostics)
        return fragments, diags

    library = None
    lib_diags: list = []
    if library_paths:
        lib_fragments, lib_diags = load(library_paths)
        library = resolve(lib_fragments)
        lib_diags = lib_diags + library.diagnostics
        library.diagnostics = []
    fragments, parse_diags = load(paths)
    model = analyze(fragments, library)
    model.diagnostics = lib_diags + parse_diags + model.diagnostics
    return model


def spec_files(directory) -> list:
    d = Path(directory)
    return sorted(str(p) for p in d.glob("*.afs")) if d.is_dir() else []
