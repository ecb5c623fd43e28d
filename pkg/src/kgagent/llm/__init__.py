"""Model access: clients, retrying gateway, structured parsing and usage accounting."""

from kgagent.llm.backoff import BackoffPolicy
from kgagent.llm.clients import (
    ChatClient, HttpChatClient, ScriptedClient, TranscriptEntry, TranscriptError, load_transcript,
)
from kgagent.llm.gateway import Gateway
from kgagent.llm.ledger import (
    Price, PricingError, UsageLedger, UsageRecord, compute_cost, load_pricing, parse_pricing,
)
from kgagent.llm.structured import StructuredParseError, extract_object, parse_structured
from kgagent.llm.types import (
    ChatRequest, ChatResponse, LLMError, Message, RequestError, RetryExhausted,
    TransientLLMError, estimate_tokens,
)

__all__ = [
    "BackoffPolicy", "ChatClient", "ChatRequest", "ChatResponse", "Gateway", "HttpChatClient",
    "LLMError", "Message", "Price", "PricingError", "RequestError", "RetryExhausted",
    "ScriptedClient", "StructuredParseError", "TranscriptEntry", "TranscriptError",
    "TransientLLMError", "UsageLedger", "UsageRecord", "compute_cost", "estimate_tokens",
    "extract_object", "load_pricing", "load_transcript", "parse_pricing", "parse_structured",
]
