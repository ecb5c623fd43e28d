"""Batch execution, scoring, fusion and reports."""

from kgagent.runner.batch import result_for, run_batch
from kgagent.runner.report import (
    CSV_COLUMNS, ReportError, RunReport, TaskResult, emit_report, fuse_reports, load_report,
    report_from_dict, write_report,
)
from kgagent.runner.scoring import normalize_answer, score_answer
from kgagent.runner.stealing import Completion, Simulation, WorkerQueueSet, run_pool, simulate
from kgagent.runner.tasks import TaskFileError, TaskRecord, load_tasks, parse_task

__all__ = [
    "CSV_COLUMNS", "Completion", "ReportError", "RunReport", "Simulation", "TaskFileError",
    "TaskRecord", "TaskResult", "WorkerQueueSet", "emit_report", "fuse_reports", "load_report",
    "load_tasks", "normalize_answer", "parse_task", "report_from_dict", "result_for", "run_batch",
    "run_pool", "score_answer", "simulate", "write_report",
]
