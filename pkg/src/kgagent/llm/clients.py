"""Chat backends: a replayable transcript client and an OpenAI-compatible HTTP client."""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import httpx

from kgagent.llm.types import (
    ChatRequest, ChatResponse, RequestError, TransientLLMError, estimate_tokens,
)


class ChatClient(Protocol):
    def send(self, request: ChatRequest) -> ChatResponse: ...


class TranscriptError(ValueError):
    pass


@dataclass(frozen=True)
class TranscriptEntry:
    tag: str
    index: int  # occurrence of ``tag``; -1 answers every occurrence without its own entry
    response: str
    fail_times: int = 0
    status: int = 500


def load_transcript(path: str | Path) -> list[TranscriptEntry]:
    entries = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
            entries.append(TranscriptEntry(
                tag=str(raw["tag"]), index=int(raw["index"]), response=str(raw["response"]),
                fail_times=int(raw.get("fail_times", 0)), status=int(raw.get("status", 500))))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise TranscriptError(f"{path}:{lineno}: bad transcript line: {exc}") from exc
    return entries


class ScriptedClient:
    """Replays canned responses keyed by (request tag, occurrence index).

    An entry with ``fail_times = k`` raises a status error on its first k
    deliveries; the occurrence counter only advances on success, so retries
    see the same entry. Token counts are estimated from text length and
    latency is always 0, which keeps ledgers byte-deterministic.
    """

    def __init__(self, entries: list[TranscriptEntry], model: str = "scripted"):
        self.model = model
        self._entries: dict[tuple[str, int], TranscriptEntry] = {}
        for e in entries:
            key = (e.tag, e.index)
            if key in self._entries:
                raise TranscriptError(f"duplicate transcript entry for tag {e.tag!r} index {e.index}")
            self._entries[key] = e
        self._occurrence: dict[str, int] = {}
        self._failures: dict[tuple[str, int], int] = {}
        self._lock = threading.Lock()
        self.calls: list[str] = []

    @classmethod
    def from_file(cls, path: str | Path, model: str = "scripted") -> "ScriptedClient":
        return cls(load_transcript(path), model)

    def occurrences(self, tag: str) -> int:
        with self._lock:
            return self._occurrence.get(tag, 0)

    def send(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            tag = request.tag
            n = self._occurrence.get(tag, 0)
            entry = self._entries.get((tag, n)) or self._entries.get((tag, -1))
            self.calls.append(tag)
            if entry is None:
                raise RequestError(f"transcript has no response for {tag!r} occurrence {n}", 400)
            failed = self._failures.get((tag, n), 0)
            if failed < entry.fail_times:
                self._failures[(tag, n)] = failed + 1
                error = TransientLLMError if entry.status >= 500 or entry.status == 429 else RequestError
                raise error(f"scripted failure {failed + 1} for {tag!r} occurrence {n}", entry.status)
            self._occurrence[tag] = n + 1
        return ChatResponse(
            text=entry.response,
            prompt_tokens=estimate_tokens(request.prompt_text()),
            completion_tokens=estimate_tokens(entry.response),
            latency=0.0,
            model=self.model,
        )


class HttpChatClient:
    """Client for any server speaking the OpenAI chat-completions schema."""

    def __init__(self, base_url: str, api_key: str | None = None, timeout: float = 120.0,
                 transport: httpx.BaseTransport | None = None):
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._http = httpx.Client(base_url=base_url.rstrip("/"), headers=headers,
                                  timeout=timeout, transport=transport)

    @classmethod
    def from_env(cls, base_url: str | None = None, timeout: float = 120.0) -> "HttpChatClient":
        url = base_url or os.environ.get("KGAGENT_API_BASE", "https://api.openai.com/v1")
        key = os.environ.get("KGAGENT_API_KEY") or os.environ.get("OPENAI_API_KEY")
        return cls(url, key, timeout)

    def close(self) -> None:
        self._http.close()

    def send(self, request: ChatRequest) -> ChatResponse:
        body: dict = {
            "model": request.model,
            "messages": [m.as_dict() for m in request.messages],
            "temperature": request.temperature,
        }
        if request.seed is not None:
            body["seed"] = request.seed
        if request.max_tokens is not None:
            body["max_tokens"] = request.max_tokens
        start = time.monotonic()
        try:
            resp = self._http.post("/chat/completions", json=body)
        except httpx.TimeoutException as exc:
            raise TransientLLMError(f"timeout: {exc}") from exc
        except httpx.TransportError as exc:
            raise TransientLLMError(f"transport error: {exc}") from exc
        latency = time.monotonic() - start
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientLLMError(f"code {resp.status_code}: {resp.text[:200]}", resp.status_code)
        if resp.status_code >= 400:
            raise RequestError(f"code {resp.status_code}: {resp.text[:200]}", resp.status_code)
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransientLLMError(f"malformed response body: {exc}") from exc
        usage = data.get("usage") or {}
        return ChatResponse(
            text=text,
            prompt_tokens=int(usage.get("prompt_tokens", estimate_tokens(request.prompt_text()))),
            completion_tokens=int(usage.get("completion_tokens", estimate_tokens(text))),
            latency=latency,
            model=str(data.get("model", request.model)),
        )
