from __future__ import annotations

import math
from dataclasses import dataclass, field


class LLMError(Exception):
    """Base class for model access failures."""


class TransientLLMError(LLMError):
    """Server-side or rate-limit failure worth retrying (5xx, 429, timeouts)."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class RequestError(LLMError):
    """The request itself was rejected (4xx other than 429); never retried."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class RetryExhausted(LLMError):
    def __init__(self, attempts: int, last_cause: BaseException | None, waits: tuple[float, ...] = ()):
        self.attempts = attempts
        self.last_cause = last_cause
        self.waits = waits
        super().__init__(f"gave up after {attempts} attempts: {last_cause}")


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def as_dict(self) -> dict[str, str]:
        return {"role": self.role, "content": self.content}


@dataclass
class ChatRequest:
    messages: list[Message]
    model: str = "scripted"
    temperature: float = 0.0
    seed: int | None = None
    max_tokens: int | None = None
    tag: str = "chat"  # prompt template name; keys scripted transcripts and ledger labels

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("a chat request needs at least one message")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.max_tokens is not None and self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")

    @classmethod
    def user(cls, text: str, **kwargs) -> "ChatRequest":
        return cls([Message("user", text)], **kwargs)

    def prompt_text(self) -> str:
        return "\n".join(m.content for m in self.messages)


@dataclass
class ChatResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency: float = 0.0
    model: str = ""
    attempts: int = 1
    waits: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")


def estimate_tokens(text: str) -> int:
    """Rough token count used when a backend does not report usage."""
    return math.ceil(len(text) / 4)
