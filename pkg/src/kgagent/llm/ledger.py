"""Per-call usage accounting and cost computation."""

from __future__ import annotations

import json
import threading
from dataclasses import asdict, dataclass
from pathlib import Path


class PricingError(Exception):
    pass


@dataclass(frozen=True)
class Price:
    prompt_per_million: float
    completion_per_million: float


@dataclass(frozen=True)
class UsageRecord:
    label: str
    model: str
    prompt_tokens: int
    completion_tokens: int
    duration: float
    cost: float = 0.0


def load_pricing(path: str | Path) -> dict[str, Price]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return parse_pricing(data)


def parse_pricing(data: dict) -> dict[str, Price]:
    table = {}
    for model, entry in data.items():
        try:
            table[model] = Price(float(entry["prompt_per_million"]), float(entry["completion_per_million"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise PricingError(f"bad pricing entry for {model!r}: {exc}") from exc
    return table


def record_cost(record: UsageRecord, pricing: dict[str, Price]) -> float:
    price = pricing[record.model]
    return (record.prompt_tokens * price.prompt_per_million
            + record.completion_tokens * price.completion_per_million) / 1_000_000


class UsageLedger:
    """Append-only, thread-safe list of usage records."""

    def __init__(self, pricing: dict[str, Price] | None = None):
        self.pricing = pricing or {}
        self._records: list[UsageRecord] = []
        self._lock = threading.Lock()

    def record(self, label: str, model: str, prompt_tokens: int, completion_tokens: int,
               duration: float) -> UsageRecord:
        rec = UsageRecord(label, model, prompt_tokens, completion_tokens, duration)
        if model in self.pricing:
            rec = UsageRecord(label, model, prompt_tokens, completion_tokens, duration,
                              record_cost(rec, self.pricing))
        with self._lock:
            self._records.append(rec)
        return rec

    def records(self) -> list[UsageRecord]:
        with self._lock:
            return list(self._records)

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)

    @property
    def prompt_tokens(self) -> int:
        return sum(r.prompt_tokens for r in self.records())

    @property
    def completion_tokens(self) -> int:
        return sum(r.completion_tokens for r in self.records())

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    @property
    def total_cost(self) -> float:
        return sum(r.cost for r in self.records())

    def by_label(self) -> dict[str, dict[str, float]]:
        out: dict[str, dict[str, float]] = {}
        for r in self.records():
            agg = out.setdefault(r.label, {"calls": 0, "prompt_tokens": 0, "completion_tokens": 0,
                                           "duration": 0.0, "cost": 0.0})
            agg["calls"] += 1
            agg["prompt_tokens"] += r.prompt_tokens
            agg["completion_tokens"] += r.completion_tokens
            agg["duration"] += r.duration
            agg["cost"] += r.cost
        return dict(sorted(out.items()))

    def to_jsonl(self) -> str:
        return "".join(json.dumps(asdict(r), sort_keys=True) + "\n" for r in self.records())


def compute_cost(ledger: UsageLedger | list[UsageRecord], pricing: dict[str, Price]) -> float:
    """Total cost of ``ledger`` under ``pricing`` (prices per million tokens).

    Tokens are summed per model first so the result does not depend on
    record order.
    """
    records = ledger.records() if isinstance(ledger, UsageLedger) else list(ledger)
    missing = sorted({r.model for r in records} - set(pricing))
    if missing:
        raise PricingError(f"no price for model(s): {', '.join(missing)}")
    per_model: dict[str, list[int]] = {}
    for r in records:
        tokens = per_model.setdefault(r.model, [0, 0])
        tokens[0] += r.prompt_tokens
        tokens[1] += r.completion_tokens
    total = 0.0
    for model in sorted(per_model):
        p, c = per_model[model]
        total += (p * pricing[model].prompt_per_million + c * pricing[model].completion_per_million) / 1_000_000
    return total
