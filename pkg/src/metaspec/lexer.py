"""Tokenizer shared by the mini-C parser and the annotation language parser."""
from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ParseError

# Longest match first.
_OPERATORS = [
    "==>", "==", "!=", "<=", ">=", "&&", "||", "->", "..",
    "+", "-", "*", "/", "%", "<", ">", "=", "!", "&",
    "(", ")", "{", "}", "[", "]", ";", ",", ".", ":",
]

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_INT_RE = re.compile(r"[0-9]+")
_BSKW_RE = re.compile(r"\\[a-z_]+")


@dataclass
class Token:
    kind: str  # NAME INT OP BSKW ANNOT EOF
    value: str
    line: int
    col: int

    def __repr__(self):
        return f"{self.kind}({self.value!r})@{self.line}:{self.col}"


def tokenize(text: str, file: str = "<input>", base_line: int = 1,
             capture_annotations: bool = True) -> list[Token]:
    toks: list[Token] = []
    i = 0
    line = base_line
    col = 1
    n = len(text)

    def bump(span: str):
        nonlocal line, col
        nl = span.count("\n")
        if nl:
            line += nl
            col = len(span) - span.rfind("\n")
        else:
            col += len(span)

    while i < n:
        c = text[i]
        if c in " \t\r\n":
            bump(c)
            i += 1
            continue
        if text.startswith("//", i):
            j = text.find("\n", i)
            j = n if j < 0 else j
            bump(text[i:j])
            i = j
            continue
        if text.startswith("/*@", i) and capture_annotations:
            j = text.find("*/", i)
            if j < 0:
                raise ParseError("unterminated annotation block", file, line, col)
            toks.append(Token("ANNOT", text[i + 3:j], line, col))
            bump(text[i:j + 2])
            i = j + 2
            continue
        if text.startswith("/*", i):
            j = text.find("*/", i)
            if j < 0:
                raise ParseError("unterminated comment", file, line, col)
            bump(text[i:j + 2])
            i = j + 2
            continue
        if c == "\\":
            m = _BSKW_RE.match(text, i)
            if not m:
                raise ParseError("stray backslash", file, line, col)
            toks.append(Token("BSKW", m.group(), line, col))
            bump(m.group())
            i = m.end()
            continue
        m = _NAME_RE.match(text, i)
        if m:
            toks.append(Token("NAME", m.group(), line, col))
            bump(m.group())
            i = m.end()
            continue
        m = _INT_RE.match(text, i)
        if m:
            toks.append(Token("INT", m.group(), line, col))
            bump(m.group())
            i = m.end()
            continue
        for op in _OPERATORS:
            if text.startswith(op, i):
                toks.append(Token("OP", op, line, col))
                bump(op)
                i += len(op)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", file, line, col)

    toks.append(Token("EOF", "", line, col))
    return toks


class TokenStream:
    """Cursor over a token list with the usual expect/accept helpers."""

    def __init__(self, tokens: list[Token], file: str = "<input>"):
        self.tokens = tokens
        self.file = file
        self.pos = 0

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, ahead: int = 1) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def at(self, kind: str, value: str | None = None) -> bool:
        t = self.cur
        return t.kind == kind and (value is None or t.value == value)

    def at_op(self, *values: str) -> bool:
        return self.cur.kind == "OP" and self.cur.value in values

    def at_name(self, *values: str) -> bool:
        return self.cur.kind == "NAME" and self.cur.value in values

    def advance(self) -> Token:
        t = self.cur
        if t.kind != "EOF":
            self.pos += 1
        return t

    def accept(self, kind: str, value: str | None = None) -> Token | None:
        if self.at(kind, value):
            return self.advance()
        return None

    def expect(self, kind: str, value: str | None = None) -> Token:
        if self.at(kind, value):
            return self.advance()
        want = value if value is not None else kind
        return self.fail(f"expected {want!r}, found {self.cur.value or self.cur.kind!r}")

    def fail(self, message: str):
        t = self.cur
        raise ParseError(message, self.file, t.line, t.col)
