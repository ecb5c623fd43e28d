"""Command line entry point: ``kgagent solve|batch|fuse|report``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from kgagent.controller import ConfigError, ControllerConfig, run_task
from kgagent.llm import PricingError, TranscriptError
from kgagent.runner.batch import run_batch
from kgagent.runner.report import ReportError, emit_report, fuse_reports, load_report
from kgagent.runner.tasks import TaskFileError, load_tasks

log = logging.getLogger("kgagent")


def _load_config(path: str | None) -> ControllerConfig:
    return ControllerConfig.load(path) if path else ControllerConfig()


def _write(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_solve(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    tasks = load_tasks(args.task)
    if args.id:
        tasks = [t for t in tasks if t.id == args.id]
        if not tasks:
            raise TaskFileError(f"{args.task}: no task with id {args.id!r}")
    status = 0
    for task in tasks:
        outcome = run_task(task, config, snapshot_dir=args.snapshot_dir)
        if args.trace:
            Path(args.trace).mkdir(parents=True, exist_ok=True)
            (Path(args.trace) / f"task-{task.id}.trace.jsonl").write_text(outcome.trace.to_jsonl(), encoding="utf-8")
            (Path(args.trace) / f"task-{task.id}.ledger.jsonl").write_text(outcome.ledger.to_jsonl(), encoding="utf-8")
        print(json.dumps({"id": task.id, "answer": outcome.answer, "iterations": outcome.iterations,
                          "error": outcome.error, "flags": outcome.flags,
                          "llm_calls": len(outcome.ledger), "cost": outcome.ledger.total_cost},
                         ensure_ascii=False))
        if outcome.answer is None:
            status = 3
    return status


def cmd_batch(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    tasks = load_tasks(args.tasks)
    report = run_batch(tasks, config, workers=args.workers, stealing=args.steal == "on")
    _write(emit_report(report, args.format), args.output)
    totals = report.aggregates()[-1] if report.results else {"tasks": 0, "solved": 0}
    log.info("%d tasks, %d solved, %d steals", totals["tasks"], totals["solved"], report.metadata["steals"])
    return 0


def cmd_fuse(args: argparse.Namespace) -> int:
    fused = fuse_reports([load_report(p) for p in args.reports])
    _write(emit_report(fused, args.format), args.output)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    _write(emit_report(load_report(args.report), args.format), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgagent", description="Knowledge-graph question answering agent")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the tasks in a JSONL file one by one")
    p.add_argument("--task", required=True, help="task JSONL file")
    p.add_argument("--config", help="controller config (JSON)")
    p.add_argument("--id", help="only solve the task with this id")
    p.add_argument("--snapshot-dir", help="write per-iteration graph snapshots here")
    p.add_argument("--trace", metavar="DIR", help="write trace and ledger JSONL files here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("batch", help="run a task file on a worker pool and emit a report")
    p.add_argument("--tasks", required=True, help="task JSONL file")
    p.add_argument("--config", help="controller config (JSON)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--steal", choices=("on", "off"), default="on")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", "-o", help="report path (default: stdout)")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("fuse", help="fuse reports over the same task set")
    p.add_argument("reports", nargs="+", help="JSON reports")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("report", help="re-emit a JSON report as JSON or CSV")
    p.add_argument("report", help="JSON report")
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be >= 1")
    try:
        return args.func(args)
    except (ConfigError, TaskFileError, ReportError, TranscriptError, PricingError, OSError) as exc:
        print(f"kgagent: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
