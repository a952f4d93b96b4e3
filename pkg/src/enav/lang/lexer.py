"""Tokenizer for `.afs` specification files."""

from __future__ import annotations

from dataclasses import dataclass

from .ast import Diagnostic, Span

KEYWORDS = frozenset({
    "sensor", "function", "rule", "characteristic", "metric", "timeroutine",
    "apply", "as", "with", "when", "lower", "upper", "per", "coverage",
    "include", "exclude", "if", "then", "else", "and", "or", "implies", "not",
})

# longest first so '<=' wins over '<'
OPERATORS = (
    "..", "<=", ">=", "==", "!=",
    "(", ")", "[", "]", "{", "}", ",", ";", ":", "=", "@",
    "+", "-", "*", "/", "<", ">",
)


@dataclass(frozen=True)
class Token:
    kind: str  # ident number string kw op eof
    value: str
    line: int
    col: int

    def span(self, filename: str) -> Span:
        return Span(filename, self.line, self.col)


def tokenize(text: str, filename: str) -> tuple[list[Token], list[Diagnostic]]:
    tokens: list[Token] = []
    diagnostics: list[Diagnostic] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def bump(k: int = 1):
        nonlocal i, line, col
        for _ in range(k):
            if i < n and text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        c = text[i]
        if c in " \t\r\n":
            bump()
            continue
        if c == "/" and text[i:i + 2] == "//":
            while i < n and text[i] != "\n":
                bump()
            continue
        tline, tcol = line, col
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            # fractional part, but not the '..' span operator
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            tokens.append(Token("number", text[i:j], tline, tcol))
            bump(j - i)
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            tokens.append(Token("kw" if word in KEYWORDS else "ident", word, tline, tcol))
            bump(j - i)
            continue
        if c == '"':
            j = i + 1
            out = []
            closed = False
            while j < n:
                if text[j] == "\\" and j + 1 < n:
                    out.append(text[j + 1])
                    j += 2
                    continue
                if text[j] == '"':
                    closed = True
                    break
                if text[j] == "\n":
                    break
                out.append(text[j])
                j += 1
            if not closed:
                diagnostics.append(Diagnostic(
                    "error", "SyntaxError", "unterminated string literal",
                    Span(filename, tline, tcol)))
                bump(j - i)
                continue
            tokens.append(Token("string", "".join(out), tline, tcol))
            bump(j + 1 - i)
            continue
        for op in OPERATORS:
            if text.startswith(op, i):
                tokens.append(Token("op", op, tline, tcol))
                bump(len(op))
                break
        else:
            diagnostics.append(Diagnostic(
                "error", "SyntaxError", f"unexpected character {c!r}",
                Span(filename, tline, tcol)))
            bump()
    tokens.append(Token("eof", "", line, col))
    return tokens, diagnostics
