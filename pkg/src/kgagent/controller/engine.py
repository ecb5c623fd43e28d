"""The task loop: vote, grow the graph with tool output, then extract an answer."""

from __future__ import annotations

import json
import re
import tempfile
import time
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from kgagent.controller.config import ControllerConfig
from kgagent.controller.prompts import PromptLibrary
from kgagent.controller.state import NextStep, Step, TaskOutcome, TaskState, Trace, Vote
from kgagent.llm import (
    BackoffPolicy, ChatClient, ChatRequest, Gateway, HttpChatClient, LLMError, Message,
    ScriptedClient, StructuredParseError, UsageLedger, estimate_tokens, load_pricing,
    parse_structured,
)
from kgagent.query import (
    ParseError, Query, QueryError, execute_chains, execute_read, format_query, parse, repair_text,
)
from kgagent.query.ast import MatchStatement
from kgagent.query.repair import strip_fences
from kgagent.script import (
    ScriptError, ScriptSyntaxError, eval_math, format_result, parse_program, run_program,
)
from kgagent.store import Graph, export_snapshot, render_graph_text
from kgagent.tools import (
    ArgSpec, ToolCall, ToolContext, ToolRegistry, ToolSpec, builtin_registry, invoke_all,
    PluginProcess, load_corpus, register_plugin,
)

_THOUSANDS = re.compile(r"[-+]?\d{1,3}(?:,\d{3})+(?:\.\d+)?")


def format_final(text: str) -> str:
    """Apply the answer formatting rules to one candidate."""
    out, prev = text.strip(), None
    while out != prev:  # quotes and trailing punctuation can wrap each other
        prev = out
        if len(out) >= 2 and out[0] == out[-1] and out[0] in "'\"":
            out = out[1:-1].strip()
        out = out.rstrip(".!?").rstrip()
    if _THOUSANDS.fullmatch(out):
        out = out.replace(",", "")
    return out


class _StepFailed(Exception):
    """A query or script could not be compiled or run."""


@dataclass(frozen=True)
class _Language:
    name: str  # "query" | "script"

    def compile(self, text: str):
        """Parse ``text``, retrying once on the locally repaired text."""
        try:
            return self._parse(text), text
        except (ParseError, ScriptSyntaxError) as first:
            repaired = repair_text(text)
            if repaired != text:
                try:
                    return self._parse(repaired), repaired
                except (ParseError, ScriptSyntaxError):
                    pass
            raise _StepFailed(str(first)) from first

    def _parse(self, text: str):
        return parse(text) if self.name == "query" else parse_program(text)

    def read(self, text: str, graph: Graph) -> str:
        """Run a read query or script; returns "" for an empty result."""
        ast, _ = self.compile(text)
        if self.name == "query":
            if not ast.is_read:
                raise _StepFailed("expected a read-only MATCH ... RETURN query")
            try:
                table = execute_read(ast, graph)
            except QueryError as exc:
                raise _StepFailed(str(exc)) from exc
            return "" if table.is_empty() else table.to_text()
        try:
            value = run_program(ast, graph)
        except ScriptError as exc:
            raise _StepFailed(str(exc)) from exc
        if value is None or value == "" or value == []:
            return ""
        return format_result(value)


EMPTY_RESULT = "it ran without errors but returned no results"

QUERY = _Language("query")
SCRIPT = _Language("script")


def _check_write(ast: Query) -> None:
    if not ast.is_write:
        raise _StepFailed("a write statement list needs at least one CREATE or MERGE")
    if any(isinstance(s, MatchStatement) and s.returns is not None for s in ast.statements):
        raise _StepFailed("RETURN is not allowed in write statement lists")


class Controller:
    def __init__(self, config: ControllerConfig, gateway: Gateway, registry: ToolRegistry,
                 tool_context: ToolContext | None = None, prompts: PromptLibrary | None = None,
                 snapshot_dir: str | Path | None = None):
        self.config = config
        self.gateway = gateway
        self.registry = registry
        self.tool_context = tool_context or ToolContext()
        self.prompts = prompts or PromptLibrary()
        self.snapshot_dir = Path(snapshot_dir) if snapshot_dir else (
            Path(config.snapshot_dir) if config.snapshot_dir else None)

    # -- helpers -------------------------------------------------------------------

    @property
    def language(self) -> _Language:
        return SCRIPT if self.config.solve_mode == "SCRIPT" else QUERY

    def graph_text(self, state: TaskState) -> str:
        style = "property_graph" if self.config.backend == "property_graph" else "adjacency"
        return render_graph_text(state.graph, style)

    def _system(self, tag: str) -> str:
        parts = [self.prompts.system_graph]
        if tag == "define_tool_calls":
            parts.append("Available tools:\n" + self.registry.render_specs())
        elif tag in ("insert_queries", "fix_query"):
            parts.append(self.prompts.kgql_reference)
        elif tag in ("fix_code", "math_solution"):
            parts.append(self.prompts.script_reference)
        elif tag in ("next_step", "retrieve_query", "retrieve_script", "regenerate_query",
                     "regenerate_script", "forced_retrieve"):
            reference = (self.prompts.script_reference if self.config.solve_mode == "SCRIPT"
                         else self.prompts.kgql_reference)
            parts.append(f"Solve mode: {self.config.solve_mode}.\n{reference}")
        return "\n\n".join(parts)

    def _request(self, tag: str, temperature: float | None = None, **slots: str) -> ChatRequest:
        body = self.prompts.render(tag, **slots)
        return ChatRequest(
            [Message("system", self._system(tag)), Message("user", body)],
            model=self.config.model,
            temperature=self.config.temperature if temperature is None else temperature,
            seed=self.config.seed,
            tag=tag,
        )

    def _ask(self, tag: str, **slots: str) -> str:
        return self.gateway.complete(self._request(tag, **slots)).text

    def _ask_field(self, tag: str, field: str, **slots: str) -> str:
        """Ask and pull ``field`` out of a JSON reply, falling back to the raw text."""
        text = self._ask(tag, **slots)
        try:
            return str(parse_structured(text, {field: (str, int, float)})[field]).strip()
        except StructuredParseError:
            return strip_fences(text).strip()

    def _tool_calls_text(self, state: TaskState) -> str:
        return "\n".join(state.tool_calls_made) if state.tool_calls_made else "None"

    def _snapshot(self, state: TaskState) -> None:
        name = f"task-{state.task_id}-iter-{state.iteration}.json"
        text = export_snapshot(state.graph)
        state.snapshots[name] = text
        if self.snapshot_dir is not None:
            self.snapshot_dir.mkdir(parents=True, exist_ok=True)
            (self.snapshot_dir / name).write_text(text, encoding="utf-8")
        state.trace.emit("snapshot", iteration=state.iteration, name=name,
                         nodes=state.graph.node_count, relationships=state.graph.relationship_count)

    # -- decision ----------------------------------------------------------------------

    def decide_next_step(self, state: TaskState) -> NextStep:
        cfg = self.config
        request = self._request("next_step", temperature=cfg.vote_temperature,
                                initial_query=state.question,
                                existing_entities_and_relationships=self.graph_text(state),
                                tool_calls_made=self._tool_calls_text(state))
        responses = self.gateway.sample_n(request, cfg.num_next_steps_decision)
        votes: list[Vote] = []
        for r in responses:
            try:
                obj = parse_structured(r.text, {"query_type": str, "query?": (str, int, float)})
            except StructuredParseError:
                continue
            kind = obj["query_type"].strip().upper()
            if kind in ("INSERT", "RETRIEVE"):
                votes.append(Vote(kind, str(obj.get("query", "")).strip()))
        step = decide(votes, cfg.num_next_steps_decision)
        if not votes:
            state.trace.emit("votes_unparsed", iteration=state.iteration, requested=cfg.num_next_steps_decision)
        state.trace.emit("vote", iteration=state.iteration,
                         votes=[v.query_type for v in votes], unparsed=step.unparsed,
                         decision=step.value.value)
        if step.value is Step.SOLVE:
            state.candidates = list(dict.fromkeys(c for c in step.candidates if c))
        return step

    def merge_missing_reasons(self, state: TaskState, reasons: list[str]) -> str:
        if not reasons:
            raise ValueError("need at least one reason")
        listing = "\n".join(f"- {r}" for r in reasons)
        merged = self._ask("missing_information", list_of_reasons=listing).strip()
        state.trace.emit("missing_information", reasons=len(reasons), text=merged)
        return merged

    # -- enhance -------------------------------------------------------------------------

    def _define_tool_calls(self, state: TaskState) -> list[ToolCall]:
        text = self._ask("define_tool_calls", initial_query=state.question,
                         existing_entities_and_relationships=self.graph_text(state),
                         missing_information=state.missing_information or "None",
                         tool_calls_made=self._tool_calls_text(state))
        try:
            raw_calls = parse_structured(text, {"tool_calls": list})["tool_calls"]
        except StructuredParseError as exc:
            state.trace.emit("tool_calls_unparsed", reason=exc.reason)
            return []
        calls = []
        for item in raw_calls:
            if not isinstance(item, dict) or not isinstance(item.get("name"), str):
                state.trace.emit("tool_call_skipped", item=item)
                continue
            args = item.get("args", {})
            if not isinstance(args, dict):
                state.trace.emit("tool_call_skipped", item=item)
                continue
            calls.append(ToolCall(item["name"], args, f"{state.task_id}-{state.iteration}-{len(calls)}"))
        return calls

    def _insert_lists(self, state: TaskState, new_information: str) -> list[str]:
        text = self._ask("insert_queries", initial_query=state.question,
                         existing_entities_and_relationships=self.graph_text(state),
                         missing_information=state.missing_information or "None",
                         new_information=new_information)
        try:
            queries = parse_structured(text, {"queries": list})["queries"]
            return [q for q in queries if isinstance(q, str) and q.strip()]
        except StructuredParseError:
            raw = strip_fences(text).strip()
            return [raw] if raw else []

    def _fix_query(self, text: str, error: str) -> str:
        return self._ask_field("fix_query", "query", cypher_to_fix=text, error_log=error)

    def _prepare_write(self, state: TaskState, text: str) -> Query | None:
        for fixes in range(self.config.max_cypher_fixing_retry + 1):
            try:
                ast, _ = QUERY.compile(text)
                _check_write(ast)
                return ast
            except _StepFailed as exc:
                error = str(exc)
            if fixes == self.config.max_cypher_fixing_retry:
                break
            state.trace.emit("write_fix", attempt=fixes + 1, query=text, error=error)
            text = self._fix_query(text, error)
        state.trace.emit("write_discarded", query=text, error=error)
        return None

    def enhance_iteration(self, state: TaskState, step: NextStep | None = None) -> None:
        cfg = self.config
        reasons = [r for r in (step.reasons if step else []) if r]
        if reasons:
            state.missing_information = self.merge_missing_reasons(state, reasons)
        calls = self._define_tool_calls(state)
        state.trace.emit("tool_calls", iteration=state.iteration,
                         calls=[{"name": c.name, "args": c.args, "call_id": c.call_id} for c in calls])
        results = invoke_all(self.registry, calls, cfg.max_tool_retries, self.tool_context)
        pieces = []
        for call, result in zip(calls, results):
            state.trace.emit("tool_result", call_id=call.call_id, name=call.name,
                             success=result.success, attempts=result.attempts,
                             content=result.content, errors=result.errors)
            args = json.dumps(call.args, sort_keys=True, ensure_ascii=False)
            if result.success:
                preview = result.content if len(result.content) <= 300 else result.content[:300] + "..."
                state.tool_calls_made.append(f"{call.name}({args}) -> {preview}")
                pieces.append(f"[{call.name} {args}]\n{result.content}")
            else:
                state.tool_calls_made.append(f"{call.name}({args}) -> {result.summary()}")
        if pieces:
            texts = self._insert_lists(state, "\n\n".join(pieces))
            state.trace.emit("insert_lists", count=len(texts))
            prepared = [self._prepare_write(state, t) for t in texts]
            asts = [a for a in prepared if a is not None]
            if asts:
                outcomes = execute_chains(state.graph, asts)
                for ast, outcome in zip(asts, outcomes):
                    if isinstance(outcome, QueryError):
                        state.trace.emit("write_failed", query=format_query(ast), error=str(outcome))
                    else:
                        state.trace.emit("write_applied", query=format_query(ast), summary=outcome.as_dict())
        else:
            state.trace.emit("no_new_information", iteration=state.iteration)
        state.iteration += 1
        state.trace.emit("enhance", iteration=state.iteration)
        self._snapshot(state)

    # -- solve -----------------------------------------------------------------------------

    def _fix(self, lang: _Language, text: str, error: str) -> str:
        if lang is QUERY:
            return self._fix_query(text, error)
        return self._ask_field("fix_code", "code", code=text, required_modules="[]", error=error)

    def _regenerate(self, state: TaskState, lang: _Language, text: str) -> str:
        return self._ask_field(f"regenerate_{lang.name}", "query", initial_query=state.question,
                               existing_entities_and_relationships=self.graph_text(state),
                               wrong_query=text)

    def _read_attempt(self, state: TaskState, lang: _Language, text: str, regenerate: bool) -> str | None:
        cfg = self.config
        fixes = regens = 0
        while True:
            try:
                result = lang.read(text, state.graph)
                error = None
            except _StepFailed as exc:
                result, error = "", str(exc)
            state.trace.emit("read_attempt", language=lang.name, text=text,
                             outcome="ok" if result else ("error" if error else "empty"),
                             result=result, error=error)
            if result:
                return result
            if fixes < cfg.max_cypher_fixing_retry:
                fixes += 1
                text = self._fix(lang, text, error or EMPTY_RESULT)
                continue
            if regenerate and regens < cfg.max_retrieve_query_retry:
                regens += 1
                fixes = 0
                text = self._regenerate(state, lang, text)
                continue
            return None

    def direct_retrieval(self, state: TaskState, tag: str = "direct_retrieve") -> str | None:
        request = self._request(tag, initial_query=state.question,
                                existing_entities_and_relationships=self.graph_text(state))
        size = estimate_tokens(request.prompt_text())
        if size > self.config.direct_max_tokens:
            state.trace.emit("direct_too_large", tokens=size, limit=self.config.direct_max_tokens)
            state.flag("direct_too_large")
            return None
        text = self.gateway.complete(request).text
        try:
            answer = str(parse_structured(text, {"query": (str, int, float)})["query"]).strip()
        except StructuredParseError:
            answer = strip_fences(text).strip()
        state.trace.emit("direct_retrieval", answer=answer)
        return answer or None

    def solve(self, state: TaskState) -> str | None:
        if self.config.solve_mode == "DIRECT":
            return self.direct_retrieval(state)
        lang = self.language
        candidates = list(state.candidates)
        if not candidates:
            candidates = [self._ask_field(f"retrieve_{lang.name}", "query", initial_query=state.question,
                                          existing_entities_and_relationships=self.graph_text(state))]
        results: list[str] = []
        for text in candidates:
            result = self._read_attempt(state, lang, text, regenerate=True)
            if result is not None and result not in results:
                results.append(result)
        state.trace.emit("solve", candidates=len(candidates), results=results)
        return "\n".join(results) if results else None

    def forced_solution(self, state: TaskState) -> str | None:
        state.trace.emit("forced_solution", iteration=state.iteration)
        state.flag("forced")
        if self.config.solve_mode != "DIRECT":
            lang = self.language
            text = self._ask_field("forced_retrieve", "query", initial_query=state.question,
                                   existing_entities_and_relationships=self.graph_text(state))
            result = self._read_attempt(state, lang, text, regenerate=False)
            if result is not None:
                return result
        return self.direct_retrieval(state)

    # -- post-processing ---------------------------------------------------------------------

    def math_postprocess(self, state: TaskState, partial: str) -> str:
        text = self._ask("needs_math", initial_query=state.question, partial_solution=partial)
        try:
            gate = parse_structured(text, {"needs_math": bool})["needs_math"]
        except StructuredParseError:
            gate = strip_fences(text).strip().lower().rstrip(".") in ("true", "yes")
        state.trace.emit("math_gate", needs_math=gate)
        if not gate:
            return partial
        expression = self._ask_field("math_solution", "expression", initial_query=state.question,
                                     current_solution=partial)
        try:
            if re.match(r"let\b", expression):
                value = run_program(parse_program(expression), state.graph)
            else:
                value = eval_math(expression)
        except (ScriptError, ScriptSyntaxError) as exc:
            state.trace.emit("math_trap", expression=expression, error=str(exc))
            state.flag("math_trap")
            return partial
        result = format_result(value)
        state.trace.emit("math_result", expression=expression, result=result)
        return result

    def parse_final(self, state: TaskState, partial: str) -> str:
        candidates = []
        for _ in range(self.config.max_final_solution_parsing):
            text = self._ask("parse_final", initial_query=state.question, partial_solution=partial)
            try:
                raw = str(parse_structured(text, {"final_answer": (str, int, float)})["final_answer"])
            except StructuredParseError:
                raw = strip_fences(text)
            candidate = format_final(raw)
            if candidate:
                candidates.append(candidate)
        if not candidates:
            state.flag("final_parse_failed")
            state.trace.emit("final_answer", candidates=[], answer=partial, fallback=True)
            return partial
        answer = pick_majority(candidates)
        state.trace.emit("final_answer", candidates=candidates, answer=answer, fallback=False)
        return answer

    # -- whole task -------------------------------------------------------------------------

    def run(self, task_id: str, question: str, graph: Graph | None = None) -> TaskOutcome:
        state = TaskState(task_id, question, graph if graph is not None else Graph(), self.gateway.ledger)
        state.trace.emit("task_start", task_id=task_id, question=question,
                         solve_mode=self.config.solve_mode, backend=self.config.backend)
        answer: str | None = None
        error: str | None = None
        try:
            partial = None
            while True:
                if state.iteration >= self.config.max_iterations:
                    partial = self.forced_solution(state)
                    break
                step = self.decide_next_step(state)
                if step.value is Step.ENHANCE:
                    self.enhance_iteration(state, step)
                    continue
                partial = self.solve(state)
                if partial is None:
                    partial = self.forced_solution(state)
                break
            if partial is None:
                error = "no solution could be extracted"
            else:
                partial = self.math_postprocess(state, partial)
                answer = self.parse_final(state, partial)
        except LLMError as exc:
            error = f"{type(exc).__name__}: {exc}"
        state.trace.emit("task_end", answer=answer, error=error, iterations=state.iteration)
        return TaskOutcome(task_id, answer, state.iteration, state.ledger, state.trace,
                           dict(state.snapshots), export_snapshot(state.graph), error, list(state.flags))


def decide(votes: list[Vote], requested: int) -> NextStep:
    """SOLVE only on a strict majority of RETRIEVE among parsed votes."""
    counts = Counter(v.query_type for v in votes)
    value = Step.SOLVE if counts["RETRIEVE"] > counts["INSERT"] else Step.ENHANCE
    return NextStep(value, list(votes), max(0, requested - len(votes)))


def pick_majority(candidates: list[str]) -> str:
    """Most frequent candidate by case-insensitive key; ties go to the earliest."""
    keys = [c.casefold() for c in candidates]
    counts = Counter(keys)
    best = max(counts.values())
    for cand, key in zip(candidates, keys):
        if counts[key] == best:
            return cand
    raise AssertionError("unreachable")


# -- wiring from configuration --------------------------------------------------------------

def build_registry(config: ControllerConfig) -> tuple[ToolRegistry, list[PluginProcess]]:
    """Built-in tools plus the configured plugins, and the plugin processes to close."""
    registry = builtin_registry()
    processes = []
    for plugin in config.plugins:
        spec = ToolSpec(plugin["name"], plugin.get("description", ""),
                        {k: ArgSpec(**v) for k, v in plugin.get("args", {}).items()})
        processes.append(register_plugin(registry, spec, list(plugin["command"]),
                                         float(plugin.get("timeout", 30.0))))
    return registry, processes


def build_client(config: ControllerConfig, task_id: str) -> ChatClient:
    if config.transcript_dir:
        return ScriptedClient.from_file(Path(config.transcript_dir) / f"{task_id}.jsonl", config.model)
    if config.transcript:
        return ScriptedClient.from_file(config.transcript, config.model)
    return HttpChatClient.from_env(config.api_base)


def run_task(task: Any, config: ControllerConfig, *, client: ChatClient | None = None,
             registry: ToolRegistry | None = None, graph: Graph | None = None,
             sleep: Callable[[float], None] = time.sleep,
             snapshot_dir: str | Path | None = None) -> TaskOutcome:
    """Solve one task. ``task`` is a TaskRecord-like object or ``(id, question)``."""
    task_id, question = (task.id, task.question) if hasattr(task, "question") else task
    attachments = list(getattr(task, "attachments", ()) or ())
    if attachments:
        question += "\nAttached files: " + ", ".join(attachments)
    ledger = UsageLedger(load_pricing(config.pricing) if config.pricing else None)
    try:
        client = client or build_client(config, task_id)
    except (OSError, ValueError) as exc:
        trace = Trace()
        trace.emit("task_end", answer=None, error=str(exc), iterations=0)
        empty = export_snapshot(graph or Graph())
        return TaskOutcome(task_id, None, 0, ledger, trace, {}, empty, f"{type(exc).__name__}: {exc}")
    gateway = Gateway(
        client, ledger,
        policy=lambda: BackoffPolicy.seeded(config.seed, min_wait=config.backoff_min,
                                            max_wait=config.backoff_max,
                                            max_attempts=config.backoff_attempts),
        sleep=sleep)
    processes: list[PluginProcess] = []
    if registry is None:
        registry, processes = build_registry(config)
    with tempfile.TemporaryDirectory(prefix=f"kgagent-{task_id}-") as tmp:
        scratch = Path(config.work_dir) / f"task-{task_id}" if config.work_dir else Path(tmp)
        context = ToolContext(task_id=task_id, fixture_root=Path(config.fixture_root),
                              scratch_dir=scratch, gateway=gateway,
                              corpus=load_corpus(config.corpus), model=config.model)
        controller = Controller(config, gateway, registry, context, snapshot_dir=snapshot_dir)
        try:
            return controller.run(task_id, question, graph)
        finally:
            for process in processes:
                process.close()
