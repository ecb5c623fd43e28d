from __future__ import annotations

import time
from typing import Callable

from kgagent.controller import ControllerConfig, TaskOutcome, run_task
from kgagent.runner.report import RunReport, TaskResult
from kgagent.runner.scoring import score_answer
from kgagent.runner.stealing import run_pool
from kgagent.runner.tasks import TaskRecord


def result_for(task: TaskRecord, outcome: TaskOutcome | None, duration: float,
               error: str | None = None) -> TaskResult:
    if outcome is None:
        correct = False if task.expected is not None else None
        return TaskResult(task.id, task.level, None, task.expected, correct, duration=duration, error=error)
    ledger = outcome.ledger
    correct = score_answer(outcome.answer, task.expected) if task.expected is not None else None
    return TaskResult(
        task.id, task.level, outcome.answer, task.expected, correct, outcome.iterations,
        ledger.prompt_tokens, ledger.completion_tokens, ledger.total_cost,
        duration, outcome.error,
    )


def run_batch(tasks: list[TaskRecord], config: ControllerConfig, workers: int = 1,
              stealing: bool = True, solver: Callable[..., TaskOutcome] = run_task,
              sleep: Callable[[float], None] = time.sleep) -> RunReport:
    """Solve every task on a work-stealing pool; a failing task is recorded unsolved."""
    if workers < 1:
        raise ValueError("workers must be >= 1")

    def one(task: TaskRecord) -> TaskResult:
        start = time.monotonic()
        try:
            outcome = solver(task, config, sleep=sleep)
        except Exception as exc:
            return result_for(task, None, time.monotonic() - start, f"{type(exc).__name__}: {exc}")
        return result_for(task, outcome, time.monotonic() - start)

    results, log = run_pool(tasks, one, workers, stealing)
    metadata = {"workers": workers, "stealing": stealing,
                "steals": sum(1 for c in log if c.stolen_from is not None)}
    return RunReport(config.fingerprint(), list(results), metadata)
