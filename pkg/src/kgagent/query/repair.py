"""Best-effort cleanup of model-produced query or JSON text before re-parsing."""

from __future__ import annotations

import re

_FENCE = re.compile(r"```[^\n`]*\n(.*?)\n?[ \t]*```", re.S)
_OPEN_FENCE = re.compile(r"\A\s*```[^\n`]*\n")
_ESCAPE = re.compile(r"\\(u[0-9a-fA-F]{4}|U[0-9a-fA-F]{8}|x[0-9a-fA-F]{2}|[nrtbf\"'\\/])")
_SIMPLE = {"n": "\n", "r": "\r", "t": "\t", "b": "\b", "f": "\f", '"': '"', "'": "'",
           "\\": "\\", "/": "/"}
_CLOSERS = {"(": ")", "[": "]", "{": "}"}


def strip_fences(text: str) -> str:
    m = _FENCE.search(text)
    if m:
        return m.group(1)
    m = _OPEN_FENCE.match(text)
    if m:
        return text[m.end():].rstrip()
    return text


def _scan(text: str):
    """Walk ``text`` tracking string literals.

    Returns (backslash_outside_literal, open_quote_or_None, unclosed_brackets).
    """
    quote = None
    stack: list[str] = []
    stray_backslash = False
    i = 0
    while i < len(text):
        ch = text[i]
        if quote is not None:
            if ch == "\\" and quote != "`":
                i += 2
                continue
            if ch == quote:
                quote = None
        elif ch in "'\"`":
            quote = ch
        elif ch == "\\":
            stray_backslash = True
        elif ch in _CLOSERS:
            stack.append(ch)
        elif ch in ")]}":
            if stack and _CLOSERS[stack[-1]] == ch:
                stack.pop()
        i += 1
    return stray_backslash, quote, stack


def decode_escapes(text: str) -> str:
    def sub(m: re.Match) -> str:
        body = m.group(1)
        if body[0] in "uUx":
            return chr(int(body[1:], 16))
        return _SIMPLE[body]

    return _ESCAPE.sub(sub, text)


def repair_text(raw: str) -> str:
    """Return a repaired candidate for re-parsing.

    Steps, in order: drop a surrounding code fence; if backslash escapes
    appear outside any string literal (a sign the whole text was escaped
    once too often) decode them; close a single dangling quote and then a
    single unclosed bracket. Text without any of those defects comes back
    unchanged.
    """
    text = strip_fences(raw)
    stray, _, _ = _scan(text)
    if stray:
        text = decode_escapes(text)
    _, quote, stack = _scan(text)
    if quote is not None:
        text += quote
        _, quote, stack = _scan(text)
    if quote is None and len(stack) == 1:
        text += _CLOSERS[stack[0]]
    return text
