from __future__ import annotations

import time
from dataclasses import replace
from typing import Callable

from kgagent.llm.backoff import BackoffPolicy
from kgagent.llm.clients import ChatClient
from kgagent.llm.ledger import UsageLedger
from kgagent.llm.types import ChatRequest, ChatResponse, LLMError, RetryExhausted, TransientLLMError


class Gateway:
    """Retrying front door to a chat client that records every successful call."""

    def __init__(self, client: ChatClient, ledger: UsageLedger | None = None,
                 policy: Callable[[], BackoffPolicy] | BackoffPolicy | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.client = client
        self.ledger = ledger if ledger is not None else UsageLedger()
        self._policy = policy
        self.sleep = sleep

    def new_policy(self) -> BackoffPolicy:
        if self._policy is None:
            return BackoffPolicy()
        if isinstance(self._policy, BackoffPolicy):
            return self._policy
        return self._policy()

    def complete(self, request: ChatRequest, policy: BackoffPolicy | None = None) -> ChatResponse:
        """Send ``request``, retrying transient failures per ``policy``.

        Request errors propagate immediately. After ``policy.max_attempts``
        transient failures a RetryExhausted carrying the last cause is raised.
        """
        policy = policy or self.new_policy()
        waits: list[float] = []
        last: BaseException | None = None
        for attempt in range(1, policy.max_attempts + 1):
            try:
                response = self.client.send(request)
            except TransientLLMError as exc:
                last = exc
                if attempt == policy.max_attempts:
                    break
                wait = policy.wait(attempt)
                waits.append(wait)
                self.sleep(wait)
                continue
            response = replace(response, attempts=attempt, waits=tuple(waits))
            self.ledger.record(request.tag, response.model or request.model,
                               response.prompt_tokens, response.completion_tokens, response.latency)
            return response
        raise RetryExhausted(policy.max_attempts, last, tuple(waits))

    def sample_n(self, request: ChatRequest, n: int, policy: BackoffPolicy | None = None
                 ) -> list[ChatResponse]:
        """Collect ``n`` independent completions, skipping samples that fail."""
        if n < 1:
            raise ValueError("n must be at least 1")
        out: list[ChatResponse] = []
        last: BaseException | None = None
        for i in range(n):
            sample = request if request.seed is None else replace(request, seed=request.seed + i)
            try:
                out.append(self.complete(sample, policy))
            except LLMError as exc:
                last = exc
        if not out:
            raise RetryExhausted(n, last)
        return out
