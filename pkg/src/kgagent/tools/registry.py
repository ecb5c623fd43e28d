"""Tool specs, the registry, and retry-wrapped invocation."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

MAX_DESCRIPTION = 1024
DEFAULT_TOOL_RETRIES = 6

_TYPES: dict[str, tuple[type, ...]] = {
    "string": (str,),
    "integer": (int,),
    "number": (int, float),
    "boolean": (bool,),
    "array": (list,),
    "object": (dict,),
}


class ToolError(Exception):
    """A tool attempt failed; invoke_with_retry may try again."""


class ToolArgumentError(ValueError):
    """The call does not fit the tool's schema (or names no tool); never retried."""


class RegistryError(ValueError):
    pass


@dataclass(frozen=True)
class ArgSpec:
    type: str
    description: str = ""
    required: bool = True

    def __post_init__(self) -> None:
        if self.type not in _TYPES:
            raise RegistryError(f"unknown argument type {self.type!r}")


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    args: dict[str, ArgSpec] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.name or not self.name.replace("_", "").isalnum():
            raise RegistryError(f"tool name {self.name!r} must be a nonempty identifier")
        if len(self.description) > MAX_DESCRIPTION:
            raise RegistryError(
                f"description of {self.name!r} has {len(self.description)} characters, "
                f"limit is {MAX_DESCRIPTION}")

    def validate(self, args: dict[str, Any]) -> None:
        if not isinstance(args, dict):
            raise ToolArgumentError(f"{self.name}: arguments must be an object")
        unknown = sorted(set(args) - set(self.args))
        if unknown:
            raise ToolArgumentError(f"{self.name}: unknown argument(s) {', '.join(unknown)}")
        for name, spec in self.args.items():
            if name not in args:
                if spec.required:
                    raise ToolArgumentError(f"{self.name}: missing argument {name!r}")
                continue
            value = args[name]
            ok = isinstance(value, _TYPES[spec.type])
            if isinstance(value, bool) and spec.type in ("integer", "number"):
                ok = False
            if not ok:
                raise ToolArgumentError(f"{self.name}: argument {name!r} must be {spec.type}")

    def render(self) -> str:
        lines = [f"- {self.name}: {self.description}"]
        for name, spec in self.args.items():
            opt = "" if spec.required else ", optional"
            lines.append(f"    {name} ({spec.type}{opt}): {spec.description}")
        return "\n".join(lines)


@dataclass(frozen=True)
class ToolCall:
    name: str
    args: dict[str, Any]
    call_id: str = ""


@dataclass
class ToolOutput:
    content: str
    payload: Any = None


@dataclass
class ToolResult:
    name: str
    call_id: str
    success: bool
    content: str = ""
    payload: Any = None
    attempts: int = 0
    duration: float = 0.0
    errors: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.success and not self.content and self.payload is None:
            raise ValueError("a successful result needs content or a payload")

    def summary(self) -> str:
        if self.success:
            return self.content
        return "FAILED after {} attempt(s): {}".format(self.attempts, "; ".join(self.errors))


@dataclass
class ToolContext:
    """Per-task environment handed to tool behaviours."""

    task_id: str = "task"
    fixture_root: Path = field(default_factory=Path.cwd)
    scratch_dir: Path | None = None
    gateway: Any = None
    corpus: dict[str, Any] = field(default_factory=dict)
    model: str = "scripted"


Behavior = Callable[[dict[str, Any], ToolContext], "ToolOutput | str"]


class ToolRegistry:
    def __init__(self) -> None:
        self._tools: dict[str, tuple[ToolSpec, Behavior]] = {}

    def register(self, spec: ToolSpec, behavior: Behavior) -> None:
        if spec.name in self._tools:
            raise RegistryError(f"tool {spec.name!r} is already registered")
        self._tools[spec.name] = (spec, behavior)

    def __contains__(self, name: str) -> bool:
        return name in self._tools

    def __len__(self) -> int:
        return len(self._tools)

    def list_specs(self) -> list[ToolSpec]:
        return [spec for spec, _ in self._tools.values()]

    def spec(self, name: str) -> ToolSpec:
        if name not in self._tools:
            raise ToolArgumentError(f"unknown tool {name!r}")
        return self._tools[name][0]

    def behavior(self, name: str) -> Behavior:
        self.spec(name)
        return self._tools[name][1]

    def render_specs(self) -> str:
        return "\n".join(spec.render() for spec in self.list_specs())


def register_tool(registry: ToolRegistry, spec: ToolSpec, behavior: Behavior) -> ToolRegistry:
    registry.register(spec, behavior)
    return registry


def invoke_with_retry(registry: ToolRegistry, call: ToolCall,
                      max_tool_retries: int = DEFAULT_TOOL_RETRIES,
                      context: ToolContext | None = None) -> ToolResult:
    """Run ``call`` up to ``max_tool_retries`` times until one attempt succeeds.

    Schema problems raise ToolArgumentError before any attempt. Exhaustion
    returns a failed result listing every attempt's error.
    """
    if max_tool_retries < 1:
        raise ValueError("max_tool_retries must be at least 1")
    spec = registry.spec(call.name)
    spec.validate(call.args)
    behavior = registry.behavior(call.name)
    context = context or ToolContext()
    errors: list[str] = []
    start = time.monotonic()
    for attempt in range(1, max_tool_retries + 1):
        try:
            out = behavior(dict(call.args), context)
        except Exception as exc:  # any tool failure is contained and retried
            errors.append(f"attempt {attempt}: {type(exc).__name__}: {exc}")
            continue
        if isinstance(out, str):
            out = ToolOutput(out)
        payload = out.payload
        if not out.content and payload is None:
            payload = {}
        return ToolResult(call.name, call.call_id, True, out.content, payload, attempt,
                          time.monotonic() - start, errors)
    return ToolResult(call.name, call.call_id, False, "", None, max_tool_retries,
                      time.monotonic() - start, errors)


def invoke_all(registry: ToolRegistry, calls: list[ToolCall],
               max_tool_retries: int = DEFAULT_TOOL_RETRIES, context: ToolContext | None = None,
               max_workers: int | None = None) -> list[ToolResult]:
    """Invoke independent calls concurrently; results come back in call order.

    A call with bad arguments yields a failed result with zero attempts.
    """
    def one(call: ToolCall) -> ToolResult:
        try:
            return invoke_with_retry(registry, call, max_tool_retries, context)
        except ToolArgumentError as exc:
            return ToolResult(call.name, call.call_id, False, "", None, 0, 0.0, [str(exc)])

    if len(calls) <= 1 or max_workers == 1:
        return [one(c) for c in calls]
    with ThreadPoolExecutor(max_workers=max_workers or min(8, len(calls))) as pool:
        return list(pool.map(one, calls))
