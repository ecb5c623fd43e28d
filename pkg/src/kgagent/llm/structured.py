"""Pull a JSON object with known fields out of free-form model output."""

from __future__ import annotations

import json
import re
from typing import Any

from kgagent.query.repair import repair_text

_FENCED = re.compile(r"```[^\n`]*\n(.*?)```", re.S)


class StructuredParseError(ValueError):
    def __init__(self, reason: str, raw: str):
        self.reason = reason
        self.raw = raw
        super().__init__(f"{reason}; raw text: {raw[:200]!r}")


def _candidates(text: str):
    yield text.strip()
    for m in _FENCED.finditer(text):
        yield m.group(1).strip()
    decoder = json.JSONDecoder()
    for m in re.finditer(r"\{", text):
        try:
            obj, _ = decoder.raw_decode(text, m.start())
        except json.JSONDecodeError:
            continue
        yield obj


def extract_object(text: str) -> dict | None:
    """First JSON object found in ``text``: whole text, fenced blocks, then any ``{``."""
    for cand in _candidates(text):
        obj = cand
        if isinstance(cand, str):
            try:
                obj = json.loads(cand)
            except json.JSONDecodeError:
                continue
        if isinstance(obj, str):  # a JSON string that itself holds JSON
            try:
                obj = json.loads(obj)
            except json.JSONDecodeError:
                continue
        if isinstance(obj, dict):
            return obj
    return None


def _type_name(t: Any) -> str:
    if isinstance(t, tuple):
        return " or ".join(x.__name__ for x in t)
    return t.__name__


def parse_structured(text: str, schema: dict[str, Any]) -> dict[str, Any]:
    """Parse ``text`` into a dict validated against ``schema``.

    ``schema`` maps field name to an expected type (or tuple of types); a
    trailing ``?`` on the name marks the field optional. Unknown fields are
    kept. Raises StructuredParseError with the untouched raw text attached.
    """
    obj = extract_object(text)
    if obj is None:
        obj = extract_object(repair_text(text))
    if obj is None:
        raise StructuredParseError("no JSON object found", text)
    for name, expected in schema.items():
        optional = name.endswith("?")
        key = name.rstrip("?")
        if key not in obj:
            if optional:
                continue
            raise StructuredParseError(f"missing field {key!r}", text)
        value = obj[key]
        if expected is float and isinstance(value, int) and not isinstance(value, bool):
            continue
        if isinstance(value, bool) and expected is not bool and not (
                isinstance(expected, tuple) and bool in expected):
            raise StructuredParseError(f"field {key!r} should be {_type_name(expected)}", text)
        if not isinstance(value, expected):
            raise StructuredParseError(f"field {key!r} should be {_type_name(expected)}", text)
    return obj
