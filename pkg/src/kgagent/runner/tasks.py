from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

LEVELS = (1, 2, 3)
_KEYS = {"id", "level", "question", "expected", "attachments"}


class TaskFileError(ValueError):
    pass


@dataclass(frozen=True)
class TaskRecord:
    id: str
    level: int
    question: str
    expected: str | None = None
    attachments: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        out = {"id": self.id, "level": self.level, "question": self.question}
        if self.expected is not None:
            out["expected"] = self.expected
        out["attachments"] = list(self.attachments)
        return out


def parse_task(raw: object) -> TaskRecord:
    if not isinstance(raw, dict):
        raise ValueError("a task must be a JSON object")
    unknown = sorted(set(raw) - _KEYS)
    if unknown:
        raise ValueError(f"unknown field(s): {', '.join(unknown)}")
    task_id = raw.get("id")
    if not isinstance(task_id, str) or not task_id:
        raise ValueError("'id' must be a non-empty string")
    level = raw.get("level")
    if isinstance(level, bool) or level not in LEVELS:
        raise ValueError(f"'level' must be 1, 2 or 3, got {level!r}")
    question = raw.get("question")
    if not isinstance(question, str):
        raise ValueError("'question' must be a string")
    expected = raw.get("expected")
    if expected is not None and not isinstance(expected, str):
        raise ValueError("'expected' must be a string when present")
    attachments = raw.get("attachments", [])
    if not isinstance(attachments, list) or not all(isinstance(a, str) for a in attachments):
        raise ValueError("'attachments' must be a list of strings")
    return TaskRecord(task_id, level, question, expected, tuple(attachments))


def load_tasks(path: str | Path) -> list[TaskRecord]:
    """Read a JSONL task file; errors carry ``path:line``."""
    tasks: list[TaskRecord] = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            task = parse_task(json.loads(line))
        except (json.JSONDecodeError, ValueError) as exc:
            raise TaskFileError(f"{path}:{lineno}: {exc}") from exc
        if task.id in seen:
            raise TaskFileError(f"{path}:{lineno}: duplicate task id {task.id!r} (first on line {seen[task.id]})")
        seen[task.id] = lineno
        tasks.append(task)
    return tasks
