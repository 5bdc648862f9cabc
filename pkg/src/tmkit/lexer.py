"""Tokenizer shared by the .tm and .ers readers."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

from .core import Diagnostic, Span

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<badstring>"[^\n]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<arrow>->|→)
  | (?P<punct>[{}()\[\];,.=:])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # ident, string, arrow, punct, eof
    text: str
    line: int
    col: int

    @property
    def span(self) -> Span:
        return Span(self.line, self.col, self.line, self.col + max(len(self.text), 1))

    def is_(self, text: str) -> bool:
        return self.kind in ("ident", "punct", "arrow") and self.text == text


def tokenize(text: str) -> tuple[list[Token], list[Diagnostic]]:
    tokens: list[Token] = []
    diags: list[Diagnostic] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            tok = Token("bad", text[pos], line, col)
            diags.append(Diagnostic("error", "SYNTAX", f"unexpected character {text[pos]!r}", span=tok.span))
            pos += 1
            continue
        kind = m.lastgroup
        chunk = m.group()
        if kind == "badstring":
            diags.append(Diagnostic("error", "SYNTAX", "unterminated string",
                                    span=Span(line, col, line, col + len(chunk))))
        elif kind == "string":
            tokens.append(Token("string", _unquote(chunk), line, col))
        elif kind == "arrow":
            tokens.append(Token("arrow", "->", line, col))
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, chunk, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens, diags


_ESCAPES = {"n": "\n", "t": "\t", "r": "\r"}
_QUOTE = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t", "\r": "\\r"}


def _unquote(s: str) -> str:
    return re.sub(r"\\(.)", lambda m: _ESCAPES.get(m.group(1), m.group(1)), s[1:-1])


def quote(s: str) -> str:
    return '"' + "".join(_QUOTE.get(c, c) for c in s) + '"'


class SyntaxProblem(Exception):
    def __init__(self, token: Token, message: str):
        super().__init__(message)
        self.token = token
        self.message = message


class TokenStream:
    """Cursor over tokens with expect/accept helpers and resync."""

    def __init__(self, tokens: list[Token], keywords: Iterable[str] = ()):
        self.tokens = tokens
        self.i = 0
        self.keywords = frozenset(keywords)

    @property
    def peek(self) -> Token:
        return self.tokens[self.i]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def accept(self, text: str) -> bool:
        if self.peek.is_(text):
            self.next()
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.peek
        if not tok.is_(text):
            raise SyntaxProblem(tok, f"expected {text!r}, found {describe(tok)}")
        return self.next()

    def ident(self, what: str = "name") -> Token:
        tok = self.peek
        if tok.kind != "ident" or tok.text in self.keywords:
            raise SyntaxProblem(tok, f"expected {what}, found {describe(tok)}")
        return self.next()

    def string(self) -> Token:
        tok = self.peek
        if tok.kind != "string":
            raise SyntaxProblem(tok, f"expected string, found {describe(tok)}")
        return self.next()

    def resync(self) -> Token:
        """Skip past the next ';' or '}' so parsing can resume; returns it."""
        while True:
            tok = self.next()
            if tok.kind == "eof" or tok.is_(";") or tok.is_("}"):
                return tok


def describe(tok: Token) -> str:
    if tok.kind == "eof":
        return "end of input"
    if tok.kind == "string":
        return "string " + quote(tok.text)
    return repr(tok.text)
