"""Tokenizer shared by the kernel language and the program syntax."""

from __future__ import annotations

import re
from dataclasses import dataclass


class PicoSyntaxError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0, filename: str = "<input>"):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col
        self.filename = filename

    def __str__(self):
        return "%s:%d:%d: syntax: %s" % (self.filename, self.line, self.col, self.message)


@dataclass(frozen=True)
class Token:
    kind: str  # NAME, INT, FLOAT, STRING, OP, NEWLINE, EOF
    text: str
    line: int
    col: int

    @property
    def loc(self):
        return (self.line, self.col)


# Hyphens join identifier segments ("list-map"); write "x - y" for subtraction.
_NAME = r"[A-Za-z_][A-Za-z0-9_]*(?:-[A-Za-z_][A-Za-z0-9_]*)*"

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<FLOAT>\d+\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<INT>\d+)
  | (?P<STRING>"(?:[^"\\\n]|\\.)*")
  | (?P<NAME>%s)
  | (?P<OP><=|>=|!=|==|\+\+|->|[≤≥λ∅\\.,;:()\[\]|+\-*/=<>])
    """
    % _NAME,
    re.VERBOSE,
)

_OPEN = "(["
_CLOSE = ")]"


def tokenize(src: str, filename: str = "<input>", layout: bool = False) -> list[Token]:
    """Split ``src`` into tokens.

    With ``layout`` set, a NEWLINE token is produced for every line break that
    sits outside brackets and is followed by a non-indented line; indented
    lines continue the previous declaration.
    """
    tokens: list[Token] = []
    pos = 0
    line, line_start = 1, 0
    depth = 0
    pending_nl = False
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise PicoSyntaxError(
                "unexpected character %r" % src[pos], line, pos - line_start + 1, filename
            )
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        pos = m.end()
        if kind == "nl":
            if depth == 0:
                pending_nl = True
            line += 1
            line_start = pos
            continue
        if kind in ("ws", "comment"):
            continue
        if pending_nl:
            pending_nl = False
            if layout and col == 1 and tokens:
                tokens.append(Token("NEWLINE", "\n", line, col))
        if kind == "OP":
            if text in _OPEN:
                depth += 1
            elif text in _CLOSE:
                depth = max(0, depth - 1)
        tokens.append(Token(kind, text, line, col))
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens


class TokenStream:
    def __init__(self, tokens: list[Token], filename: str = "<input>"):
        self.tokens = tokens
        self.i = 0
        self.filename = filename

    def peek(self, k: int = 0) -> Token:
        j = min(self.i + k, len(self.tokens) - 1)
        return self.tokens[j]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "EOF":
            self.i += 1
        return tok

    def at(self, *texts: str) -> bool:
        tok = self.peek()
        return tok.kind in ("OP", "NAME") and tok.text in texts

    def accept(self, *texts: str) -> Token | None:
        if self.at(*texts):
            return self.next()
        return None

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if tok.kind in ("OP", "NAME") and tok.text == text:
            return self.next()
        raise self.error("expected %r, found %s" % (text, describe(tok)), tok)

    def expect_kind(self, kind: str, what: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise self.error("expected %s, found %s" % (what, describe(tok)), tok)
        return self.next()

    def error(self, message: str, tok: Token | None = None) -> PicoSyntaxError:
        tok = tok or self.peek()
        return PicoSyntaxError(message, tok.line, tok.col, self.filename)


def describe(tok: Token) -> str:
    if tok.kind == "EOF":
        return "end of input"
    if tok.kind == "NEWLINE":
        return "end of line"
    return repr(tok.text)
