from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any

KEYWORDS = frozenset({"MATCH", "WHERE", "RETURN", "CREATE", "MERGE", "SET", "AS", "AND", "OR", "COUNT"})
BOOLEANS = frozenset({"TRUE", "FALSE"})

_SIMPLE_ESCAPES = {"\\": "\\", "'": "'", '"': '"', "n": "\n", "t": "\t", "r": "\r",
                   "b": "\b", "f": "\f", "/": "/"}

_NUMBER = re.compile(r"\d+(?:\.\d+)?(?:[eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_PUNCT2 = ("<>", "<=", ">=")
_PUNCT1 = "()[]{}:,.;=<>-*"


class ParseError(Exception):
    """Syntax or binding error, located by byte offset in the source text."""

    def __init__(self, message: str, text: str, offset: int,
                 expected: frozenset[str] | set[str] = frozenset(), found: str = ""):
        self.message = message
        self.text = text
        self.offset = offset
        self.expected = frozenset(expected)
        self.found = found
        self.line = text.count("\n", 0, offset) + 1
        self.column = offset - (text.rfind("\n", 0, offset) + 1) + 1
        super().__init__(self.render())

    def render(self) -> str:
        where = f"{self.line}:{self.column}"
        found = repr(self.found) if self.found else "end of input"
        if self.expected:
            return f"{where} expected {' or '.join(sorted(self.expected))} found {found}"
        return f"{where} {self.message} (found {found})"


@dataclass(frozen=True)
class Token:
    kind: str  # keyword | identifier | string | number | boolean | punct | eof
    text: str
    offset: int
    value: Any = None


def _read_string(text: str, start: int) -> tuple[str, int]:
    quote = text[start]
    out = []
    i = start + 1
    while i < len(text):
        ch = text[i]
        if ch == quote:
            return "".join(out), i + 1
        if ch == "\\":
            if i + 1 >= len(text):
                break
            esc = text[i + 1]
            if esc in _SIMPLE_ESCAPES:
                out.append(_SIMPLE_ESCAPES[esc])
                i += 2
                continue
            if esc == "u" and re.fullmatch(r"[0-9a-fA-F]{4}", text[i + 2:i + 6]):
                out.append(chr(int(text[i + 2:i + 6], 16)))
                i += 6
                continue
            raise ParseError("invalid escape sequence", text, i, found=text[i:i + 2])
        out.append(ch)
        i += 1
    raise ParseError("unterminated string literal", text, start, found=text[start:start + 20])


def tokenize(text: str) -> list[Token]:
    """Split KGQL source into tokens; the final token has kind ``eof``."""
    tokens: list[Token] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "'\"":
            value, end = _read_string(text, i)
            tokens.append(Token("string", text[i:end], i, value))
            i = end
            continue
        if ch == "`":
            end = i + 1
            buf = []
            while True:
                j = text.find("`", end)
                if j < 0:
                    raise ParseError("unterminated quoted identifier", text, i, found=text[i:i + 20])
                buf.append(text[end:j])
                if text.startswith("``", j):
                    buf.append("`")
                    end = j + 2
                    continue
                end = j + 1
                break
            name = "".join(buf)
            if not name:
                raise ParseError("empty quoted identifier", text, i, found="``")
            tokens.append(Token("identifier", text[i:end], i, name))
            i = end
            continue
        m = _NUMBER.match(text, i)
        if m:
            raw = m.group()
            value = float(raw) if any(c in raw for c in ".eE") else int(raw)
            tokens.append(Token("number", raw, i, value))
            i = m.end()
            continue
        m = _IDENT.match(text, i)
        if m:
            raw = m.group()
            upper = raw.upper()
            if upper in KEYWORDS:
                tokens.append(Token("keyword", raw, i, upper))
            elif upper in BOOLEANS:
                tokens.append(Token("boolean", raw, i, upper == "TRUE"))
            else:
                tokens.append(Token("identifier", raw, i, raw))
            i = m.end()
            continue
        two = text[i:i + 2]
        if two in _PUNCT2:
            tokens.append(Token("punct", two, i, two))
            i += 2
            continue
        if ch in _PUNCT1:
            tokens.append(Token("punct", ch, i, ch))
            i += 1
            continue
        raise ParseError("unexpected character", text, i, found=ch)
    tokens.append(Token("eof", "", n))
    return tokens
