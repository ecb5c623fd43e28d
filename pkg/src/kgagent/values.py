"""Comparison semantics shared by the store, the query evaluator and scripts.

Values fall into four kinds: booleans, numbers (int/float, never bool),
strings and lists. Equality across kinds is always false; ordering is only
defined within a kind (lists excluded).
"""

from __future__ import annotations

from typing import Any


def kind(value: Any) -> str:
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, (int, float)):
        return "number"
    if isinstance(value, str):
        return "text"
    if isinstance(value, list):
        return "list"
    if value is None:
        return "null"
    return "other"


def values_equal(a: Any, b: Any) -> bool:
    ka, kb = kind(a), kind(b)
    if ka != kb or ka in ("null", "other"):
        return False
    if ka == "list":
        return len(a) == len(b) and all(values_equal(x, y) for x, y in zip(a, b))
    return a == b


def compare(a: Any, b: Any) -> int | None:
    """Three-way comparison, or None when the pair is not ordered."""
    ka, kb = kind(a), kind(b)
    if ka != kb or ka not in ("bool", "number", "text"):
        return None
    return (a > b) - (a < b)


def format_value(value: Any) -> str:
    """Canonical text for a value: shortest round-trip floats, lowercase
    booleans, bracketed lists."""
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return "[" + ", ".join(format_value(v) for v in value) + "]"
    return str(value)
