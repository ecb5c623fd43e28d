"""Out-of-process tools speaking JSON lines over stdin/stdout.

Each request is one line ``{"call_id": str, "tool": str, "args": {...}}``;
the plugin answers with one line
``{"call_id": str, "ok": bool, "content": str, "payload": ..., "error": str}``.
"""

from __future__ import annotations

import itertools
import json
import selectors
import subprocess
import threading
from typing import Any

from kgagent.tools.registry import ToolContext, ToolError, ToolOutput, ToolRegistry, ToolSpec


class PluginProcess:
    def __init__(self, command: list[str], timeout: float = 30.0):
        self.command = list(command)
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None
        self._lock = threading.Lock()
        self._ids = itertools.count(1)

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                                          stderr=subprocess.DEVNULL, text=True, bufsize=1)
        return self._proc

    def _readline(self, proc: subprocess.Popen) -> str:
        sel = selectors.DefaultSelector()
        sel.register(proc.stdout, selectors.EVENT_READ)
        try:
            if not sel.select(self.timeout):
                self._kill()
                raise ToolError(f"plugin did not answer within {self.timeout} s")
        finally:
            sel.close()
        line = proc.stdout.readline()
        if not line:
            self._kill()
            raise ToolError("plugin closed its output")
        return line

    def request(self, tool: str, args: dict[str, Any]) -> dict[str, Any]:
        with self._lock:
            proc = self._ensure()
            call_id = f"c{next(self._ids)}"
            try:
                proc.stdin.write(json.dumps({"call_id": call_id, "tool": tool, "args": args}) + "\n")
                proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                self._kill()
                raise ToolError(f"plugin not accepting input: {exc}") from exc
            line = self._readline(proc)
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ToolError(f"plugin sent invalid JSON: {line[:200]!r}") from exc
        if not isinstance(reply, dict) or reply.get("call_id") != call_id:
            raise ToolError(f"plugin reply does not match call {call_id}")
        return reply

    def _kill(self) -> None:
        if self._proc is not None:
            self._proc.kill()
            self._proc.wait()
            self._proc = None

    def close(self) -> None:
        with self._lock:
            if self._proc is not None and self._proc.poll() is None:
                self._proc.stdin.close()
                try:
                    self._proc.wait(timeout=5)
                except subprocess.TimeoutExpired:
                    self._proc.kill()
                    self._proc.wait()
            self._proc = None


def plugin_behavior(process: PluginProcess, tool: str):
    def behavior(args: dict[str, Any], ctx: ToolContext) -> ToolOutput:
        reply = process.request(tool, args)
        if not reply.get("ok"):
            raise ToolError(str(reply.get("error") or "plugin reported failure"))
        return ToolOutput(str(reply.get("content", "")), reply.get("payload"))
    return behavior


def register_plugin(registry: ToolRegistry, spec: ToolSpec, command: list[str],
                    timeout: float = 30.0) -> PluginProcess:
    process = PluginProcess(command, timeout)
    registry.register(spec, plugin_behavior(process, spec.name))
    return process
