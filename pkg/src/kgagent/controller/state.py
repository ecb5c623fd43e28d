from __future__ import annotations

import enum
import json
import threading
from dataclasses import dataclass, field
from typing import Any

from kgagent.llm.ledger import UsageLedger
from kgagent.store import Graph


class Step(str, enum.Enum):
    ENHANCE = "ENHANCE"
    SOLVE = "SOLVE"


@dataclass
class Vote:
    query_type: str  # INSERT | RETRIEVE
    text: str


@dataclass
class NextStep:
    value: Step
    votes: list[Vote]
    unparsed: int = 0

    @property
    def reasons(self) -> list[str]:
        return [v.text for v in self.votes if v.query_type == "INSERT"]

    @property
    def candidates(self) -> list[str]:
        return [v.text for v in self.votes if v.query_type == "RETRIEVE"]


class Trace:
    """Append-only event log; ``seq`` numbers events in emission order."""

    def __init__(self) -> None:
        self.events: list[dict[str, Any]] = []
        self._lock = threading.Lock()

    def emit(self, kind: str, **payload: Any) -> None:
        with self._lock:
            self.events.append({"seq": len(self.events), "kind": kind, "payload": payload})

    def of_kind(self, kind: str) -> list[dict[str, Any]]:
        return [e for e in self.events if e["kind"] == kind]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True, ensure_ascii=False) + "\n" for e in self.events)


@dataclass
class TaskState:
    task_id: str
    question: str
    graph: Graph
    ledger: UsageLedger
    trace: Trace = field(default_factory=Trace)
    iteration: int = 0
    tool_calls_made: list[str] = field(default_factory=list)
    missing_information: str = ""
    candidates: list[str] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    snapshots: dict[str, str] = field(default_factory=dict)

    def flag(self, name: str) -> None:
        if name not in self.flags:
            self.flags.append(name)


@dataclass
class TaskOutcome:
    task_id: str
    answer: str | None
    iterations: int
    ledger: UsageLedger
    trace: Trace
    snapshots: dict[str, str]
    final_snapshot: str
    error: str | None = None
    flags: list[str] = field(default_factory=list)

    @property
    def solved(self) -> bool:
        return self.answer is not None
