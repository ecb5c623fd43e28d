"""Exact-match scoring after answer normalization.

Both sides are reduced to the same canonical form, so scoring is symmetric:
a number (commas, whitespace, currency and percent signs dropped), a list
(split on commas or semicolons, each element normalized on its own) or a
string (lowercased, articles and final punctuation removed).
"""

from __future__ import annotations

import re

_CURRENCY = re.compile(r"[$€£¥%]|\b(?:usd|eur|gbp)\b", re.IGNORECASE)
_PLAIN_NUMBER = re.compile(r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:e[-+]?\d+)?", re.IGNORECASE)
_THOUSANDS = re.compile(r"[-+]?\d{1,3}(?:,\d{3})+(?:\.\d+)?")
_ARTICLES = re.compile(r"\b(?:a|an|the)\b")
_FINAL_PUNCT = ".!?;:"


def as_number(text: str) -> float | None:
    t = _CURRENCY.sub("", text)
    t = re.sub(r"\s+", "", t)
    if _THOUSANDS.fullmatch(t):
        t = t.replace(",", "")
    if not _PLAIN_NUMBER.fullmatch(t):
        return None
    return float(t)


def normalize_string(text: str) -> str:
    t = text.strip().lower()
    if len(t) >= 2 and t[0] == t[-1] and t[0] in "'\"":
        t = t[1:-1]
    t = t.rstrip(_FINAL_PUNCT + " ")
    t = _ARTICLES.sub(" ", t)
    return " ".join(t.split())


def _element(text: str) -> tuple:
    number = as_number(text)
    if number is not None:
        return ("number", number)
    return ("text", normalize_string(text))


def normalize_answer(text: str) -> tuple:
    """Canonical form used for comparison."""
    text = text.strip()
    if as_number(text) is not None:
        return _element(text)
    body = text.rstrip(_FINAL_PUNCT + " ")
    if "," in body or ";" in body:
        return ("list", tuple(_element(part) for part in re.split(r"[,;]", body)))
    return _element(text)


def score_answer(given: str | None, expected: str) -> bool:
    if given is None:
        return False
    return normalize_answer(given) == normalize_answer(expected)
