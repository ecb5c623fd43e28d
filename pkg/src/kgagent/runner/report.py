from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

FUSION_PREFIX = "fusion:"
CSV_COLUMNS = ("level", "tasks", "answered", "solved", "iterations", "prompt_tokens",
               "completion_tokens", "cost", "duration")


class ReportError(ValueError):
    pass


@dataclass
class TaskResult:
    id: str
    level: int
    answer: str | None
    expected: str | None = None
    correct: bool | None = None  # None when there is nothing to score against
    iterations: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    cost: float = 0.0
    duration: float = 0.0
    error: str | None = None

    @property
    def solved(self) -> bool:
        return self.correct is True

    @property
    def tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


@dataclass
class RunReport:
    fingerprint: str
    results: list[TaskResult] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)

    def task_ids(self) -> list[str]:
        return [r.id for r in self.results]

    def solved_ids(self) -> set[str]:
        return {r.id for r in self.results if r.solved}

    def total_cost(self) -> float:
        return sum(r.cost for r in self.results)

    def aggregates(self) -> list[dict[str, Any]]:
        """One row per level present, then a ``total`` row (no rows when empty)."""
        rows = []
        for level in sorted({r.level for r in self.results}):
            rows.append(_aggregate(str(level), [r for r in self.results if r.level == level]))
        if self.results:
            rows.append(_aggregate("total", self.results))
        return rows

    def to_dict(self) -> dict[str, Any]:
        return {
            "fingerprint": self.fingerprint,
            "metadata": self.metadata,
            "results": [asdict(r) for r in self.results],
            "aggregates": self.aggregates(),
        }


def _aggregate(level: str, results: list[TaskResult]) -> dict[str, Any]:
    return {
        "level": level,
        "tasks": len(results),
        "answered": sum(1 for r in results if r.answer is not None),
        "solved": sum(1 for r in results if r.solved),
        "iterations": sum(r.iterations for r in results),
        "prompt_tokens": sum(r.prompt_tokens for r in results),
        "completion_tokens": sum(r.completion_tokens for r in results),
        "cost": sum(r.cost for r in results),
        "duration": sum(r.duration for r in results),
    }


def emit_report(report: RunReport, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in report.aggregates():
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        return buf.getvalue()
    raise ReportError(f"unknown report format {fmt!r}; use json or csv")


def write_report(report: RunReport, path: str | Path, fmt: str = "json") -> None:
    Path(path).write_text(emit_report(report, fmt), encoding="utf-8")


def report_from_dict(data: dict[str, Any]) -> RunReport:
    try:
        known = {f.name for f in fields(TaskResult)}
        results = []
        for raw in data["results"]:
            extra = set(raw) - known
            if extra:
                raise ReportError(f"unknown result field(s): {', '.join(sorted(extra))}")
            results.append(TaskResult(**raw))
        return RunReport(str(data["fingerprint"]), results, dict(data.get("metadata", {})))
    except (KeyError, TypeError) as exc:
        raise ReportError(f"malformed report: {exc}") from exc


def load_report(path: str | Path) -> RunReport:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ReportError(f"{path}: not JSON: {exc}") from exc
    return report_from_dict(data)


def _leaves(fingerprint: str) -> list[str]:
    if fingerprint.startswith(FUSION_PREFIX):
        return fingerprint[len(FUSION_PREFIX):].split("+")
    return [fingerprint]


def fuse_reports(reports: list[RunReport]) -> RunReport:
    """Solved in the fusion iff solved by any constituent; costs and tokens add up.

    Per task the answer comes from the first constituent that solved it (else
    the first that answered); duration is the slowest constituent, since the
    configurations can run side by side.
    """
    if not reports:
        raise ReportError("nothing to fuse")
    ids = reports[0].task_ids()
    if len(set(ids)) != len(ids):
        raise ReportError("duplicate task ids in a report")
    for other in reports[1:]:
        if set(other.task_ids()) != set(ids) or len(other.results) != len(ids):
            raise ReportError(f"task sets differ between {reports[0].fingerprint} and {other.fingerprint}")
    by_id = [{r.id: r for r in rep.results} for rep in reports]
    fused = []
    for task_id in ids:
        parts = [m[task_id] for m in by_id]
        pick = next((p for p in parts if p.solved), None) or next(
            (p for p in parts if p.answer is not None), parts[0])
        scored = [p.correct for p in parts if p.correct is not None]
        fused.append(TaskResult(
            id=task_id, level=parts[0].level, answer=pick.answer, expected=parts[0].expected,
            correct=any(scored) if scored else None,
            iterations=sum(p.iterations for p in parts),
            prompt_tokens=sum(p.prompt_tokens for p in parts),
            completion_tokens=sum(p.completion_tokens for p in parts),
            cost=sum(p.cost for p in parts),
            duration=max(p.duration for p in parts),
            error=None if pick.answer is not None else pick.error,
        ))
    leaves = sorted(leaf for rep in reports for leaf in _leaves(rep.fingerprint))
    metadata = {"fused_from": leaves,
                "cost_accounting": "sum of all constituent runs"}
    return RunReport(FUSION_PREFIX + "+".join(leaves), fused, metadata)
