import json

import httpx
import pytest
from hypothesis import given, settings, strategies as st

from helpers import FIXTURES, write_transcript
from kgagent.llm import (
    BackoffPolicy, ChatRequest, ChatResponse, Gateway, HttpChatClient, Price, PricingError,
    RequestError, RetryExhausted, ScriptedClient, StructuredParseError, TranscriptEntry,
    TranscriptError, TransientLLMError, UsageLedger, compute_cost, estimate_tokens,
    extract_object, load_pricing, load_transcript, parse_pricing, parse_structured,
)


class Flaky:
    """Fails the first ``failures`` sends with ``error``, then answers."""

    def __init__(self, failures: int, error=TransientLLMError):
        self.failures = failures
        self.error = error
        self.sent = 0

    def send(self, request):
        self.sent += 1
        if self.sent <= self.failures:
            raise self.error("boom", 503)
        return ChatResponse("ok", 3, 1, model="m")


def request(tag="chat", **kw):
    return ChatRequest.user("hello", tag=tag, **kw)


# -- backoff ---------------------------------------------------------------------------------

def test_ceiling_doubles_and_clamps():
    p = BackoffPolicy()
    assert [p.ceiling(n) for n in range(1, 9)] == [1, 2, 4, 8, 16, 32, 60, 60]
    assert BackoffPolicy(min_wait=5).ceiling(1) == 5


@given(st.integers(0, 2**32), st.integers(0, 20))
@settings(max_examples=1000, deadline=None)
def test_backoff_bounds_property(seed, failures):
    client = Flaky(failures)
    sleeps = []
    gw = Gateway(client, policy=BackoffPolicy.seeded(seed), sleep=sleeps.append)
    try:
        resp = gw.complete(request())
        assert resp.attempts == failures + 1 and list(resp.waits) == sleeps
    except RetryExhausted as exc:
        assert failures >= 6 and exc.attempts == 6 and list(exc.waits) == sleeps
    assert client.sent <= 6 and len(sleeps) == client.sent - 1
    assert all(1.0 <= w <= 60.0 for w in sleeps)
    assert all(w <= BackoffPolicy().ceiling(i) for i, w in enumerate(sleeps, 1))


def test_exhaustion_keeps_last_cause_and_records_nothing():
    gw = Gateway(Flaky(99), policy=BackoffPolicy.seeded(1), sleep=lambda s: None)
    with pytest.raises(RetryExhausted) as info:
        gw.complete(request())
    assert isinstance(info.value.last_cause, TransientLLMError) and len(gw.ledger) == 0


def test_request_errors_are_not_retried():
    client = Flaky(1, RequestError)
    gw = Gateway(client, sleep=lambda s: pytest.fail("should not sleep"))
    with pytest.raises(RequestError):
        gw.complete(request())
    assert client.sent == 1


def test_seeded_policies_repeat():
    a = [BackoffPolicy.seeded(7).wait(n) for n in range(1, 6)]
    b = [BackoffPolicy.seeded(7).wait(n) for n in range(1, 6)]
    assert a == b


def test_policy_validation():
    with pytest.raises(ValueError):
        BackoffPolicy(max_attempts=0)
    with pytest.raises(ValueError):
        BackoffPolicy(min_wait=5, max_wait=1)


# -- requests ---------------------------------------------------------------------------------

@pytest.mark.parametrize("kwargs", [{"temperature": 2.5}, {"max_tokens": 0}])
def test_request_validation(kwargs):
    with pytest.raises(ValueError):
        request(**kwargs)
    with pytest.raises(ValueError):
        ChatRequest([])


def test_estimate_tokens():
    assert estimate_tokens("") == 0 and estimate_tokens("abcde") == 2


# -- scripted client -------------------------------------------------------------------------

def test_scripted_replay_by_tag_and_index(tmp_path):
    path = write_transcript(tmp_path / "t.jsonl", [
        ("a", "first"), ("a", "second"), ("b", {"x": 1}), ("a", "later", {"index": -1}),
    ])
    client = ScriptedClient.from_file(path)
    texts = [client.send(request(t)).text for t in ("a", "b", "a", "a", "a")]
    assert texts == ["first", '{"x": 1}', "second", "later", "later"]
    assert client.occurrences("a") == 4 and client.calls == ["a", "b", "a", "a", "a"]
    with pytest.raises(RequestError):
        client.send(request("b"))


def test_scripted_failures_retry_same_entry(tmp_path):
    path = write_transcript(tmp_path / "t.jsonl", [("a", "ok", {"fail_times": 2}), ("a", "next")])
    gw = Gateway(ScriptedClient.from_file(path), policy=BackoffPolicy.seeded(0), sleep=lambda s: None)
    first = gw.complete(request("a"))
    assert (first.text, first.attempts, len(first.waits)) == ("ok", 3, 2)
    assert gw.complete(request("a")).text == "next"


def test_scripted_client_status_4xx_is_request_error(tmp_path):
    path = write_transcript(tmp_path / "t.jsonl", [("a", "ok", {"fail_times": 1, "status": 400})])
    with pytest.raises(RequestError):
        Gateway(ScriptedClient.from_file(path)).complete(request("a"))


def test_transcript_errors(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"tag": "a"}\n')
    with pytest.raises(TranscriptError, match=":1:"):
        load_transcript(bad)
    with pytest.raises(TranscriptError, match="duplicate"):
        ScriptedClient([TranscriptEntry("a", 0, "x"), TranscriptEntry("a", 0, "y")])


def test_fixture_transcripts_load():
    for name in ("q59", "q106", "always_enhance"):
        assert load_transcript(FIXTURES / "transcripts" / f"{name}.jsonl")


def test_sample_n_collects_and_shifts_seed(tmp_path):
    seen = []

    class Echo:
        def send(self, req):
            seen.append(req.seed)
            return ChatResponse(str(req.seed))

    out = Gateway(Echo()).sample_n(request(seed=10), 3)
    assert [r.text for r in out] == ["10", "11", "12"] and seen == [10, 11, 12]
    with pytest.raises(ValueError):
        Gateway(Echo()).sample_n(request(), 0)


def test_sample_n_fails_only_when_every_sample_fails():
    gw = Gateway(Flaky(99, RequestError))
    with pytest.raises(RetryExhausted):
        gw.sample_n(request(), 2)


# -- ledger and cost -------------------------------------------------------------------------

def test_ledger_records_successful_calls():
    gw = Gateway(Flaky(0), ledger=UsageLedger({"m": Price(1_000_000, 2_000_000)}))
    gw.complete(request("x"))
    gw.complete(request("y"))
    assert len(gw.ledger) == 2
    assert (gw.ledger.prompt_tokens, gw.ledger.completion_tokens, gw.ledger.total_tokens) == (6, 2, 8)
    assert gw.ledger.total_cost == pytest.approx(10.0)
    assert list(gw.ledger.by_label()) == ["x", "y"]
    lines = gw.ledger.to_jsonl().splitlines()
    assert json.loads(lines[0])["label"] == "x"


def test_compute_cost_known_value():
    ledger = UsageLedger()
    ledger.record("a", "m", 1000, 500, 0.1)
    pricing = {"m": Price(0.15, 0.6)}
    assert compute_cost(ledger, pricing) == pytest.approx((1000 * 0.15 + 500 * 0.6) / 1e6)
    ledger.record("b", "other", 1, 1, 0.0)
    with pytest.raises(PricingError, match="other"):
        compute_cost(ledger, pricing)


@given(st.lists(st.tuples(st.sampled_from(["m1", "m2"]), st.integers(0, 10**6), st.integers(0, 10**6)),
                max_size=20), st.randoms())
@settings(max_examples=100, deadline=None)
def test_cost_ignores_record_order(rows, rnd):
    pricing = {"m1": Price(0.15, 0.6), "m2": Price(2.5, 10.0)}
    a, b = UsageLedger(), UsageLedger()
    for model, p, c in rows:
        a.record("l", model, p, c, 0.0)
    shuffled = list(rows)
    rnd.shuffle(shuffled)
    for model, p, c in shuffled:
        b.record("l", model, p, c, 0.0)
    assert compute_cost(a, pricing) == compute_cost(b, pricing)


def test_pricing_files():
    table = load_pricing(FIXTURES / "pricing.json")
    assert table["scripted"] == Price(0.15, 0.6)
    with pytest.raises(PricingError):
        parse_pricing({"m": {"prompt_per_million": 1}})


# -- structured parsing ----------------------------------------------------------------------

@pytest.mark.parametrize("text", [
    '{"query_type": "RETRIEVE", "query": "MATCH (n) RETURN n.x"}',
    'Sure:\n```json\n{"query_type": "RETRIEVE", "query": "MATCH (n) RETURN n.x"}\n```',
    'I think {"query_type": "RETRIEVE", "query": "MATCH (n) RETURN n.x"} is right.',
    json.dumps(json.dumps({"query_type": "RETRIEVE", "query": "MATCH (n) RETURN n.x"})),
])
def test_structured_extraction_variants(text):
    obj = parse_structured(text, {"query_type": str, "query?": str})
    assert obj["query_type"] == "RETRIEVE" and obj["query"] == "MATCH (n) RETURN n.x"


def test_structured_optional_and_unknown_fields():
    assert parse_structured('{"a": 1, "extra": true}', {"a": int, "b?": str}) == {"a": 1, "extra": True}
    assert parse_structured('{"x": 2}', {"x": float}) == {"x": 2}


@pytest.mark.parametrize("text, schema, reason", [
    ("no json here", {"a": int}, "no JSON object"),
    ('{"b": 1}', {"a": int}, "missing field 'a'"),
    ('{"a": "1"}', {"a": int}, "should be int"),
    ('{"a": true}', {"a": int}, "should be int"),
])
def test_structured_errors_keep_raw_text(text, schema, reason):
    with pytest.raises(StructuredParseError) as info:
        parse_structured(text, schema)
    assert info.value.raw == text and reason in info.value.reason


def test_extract_object_skips_non_objects():
    assert extract_object("[1, 2] then {\"k\": 3}") == {"k": 3}
    assert extract_object("{broken") is None


# -- HTTP client -------------------------------------------------------------------------

def http_client(handler):
    return HttpChatClient("https://llm.test/v1", "secret", transport=httpx.MockTransport(handler))


def test_http_client_sends_openai_body_and_reads_usage():
    captured = {}

    def handler(req):
        captured["auth"] = req.headers["authorization"]
        captured["url"] = str(req.url)
        captured["body"] = json.loads(req.content)
        return httpx.Response(200, json={
            "model": "m-1", "choices": [{"message": {"content": "hi"}}],
            "usage": {"prompt_tokens": 12, "completion_tokens": 3}})

    resp = http_client(handler).send(request(seed=4, max_tokens=50, temperature=0.7, model="m"))
    assert (resp.text, resp.prompt_tokens, resp.completion_tokens, resp.model) == ("hi", 12, 3, "m-1")
    assert captured["url"] == "https://llm.test/v1/chat/completions"
    assert captured["auth"] == "Bearer secret"
    assert captured["body"] == {"model": "m", "messages": [{"role": "user", "content": "hello"}],
                                "temperature": 0.7, "seed": 4, "max_tokens": 50}


def test_http_client_estimates_missing_usage():
    resp = http_client(lambda r: httpx.Response(200, json={"choices": [{"message": {"content": "abcd"}}]})
                       ).send(request())
    assert resp.completion_tokens == 1 and resp.prompt_tokens == 2


@pytest.mark.parametrize("status, error", [(429, TransientLLMError), (503, TransientLLMError),
                                           (400, RequestError), (401, RequestError)])
def test_http_status_classification(status, error):
    with pytest.raises(error) as info:
        http_client(lambda r: httpx.Response(status, text="nope")).send(request())
    assert info.value.status == status


def test_http_malformed_body_and_timeouts_are_transient():
    with pytest.raises(TransientLLMError, match="malformed"):
        http_client(lambda r: httpx.Response(200, json={"choices": []})).send(request())

    def timeout(req):
        raise httpx.ReadTimeout("slow", request=req)

    with pytest.raises(TransientLLMError, match="timeout"):
        http_client(timeout).send(request())


def test_gateway_retries_http_server_errors():
    statuses = iter([500, 502, 200])

    def handler(req):
        code = next(statuses)
        if code != 200:
            return httpx.Response(code)
        return httpx.Response(200, json={"choices": [{"message": {"content": "done"}}]})

    sleeps = []
    gw = Gateway(http_client(handler), policy=BackoffPolicy.seeded(3), sleep=sleeps.append)
    assert gw.complete(request()).text == "done" and len(sleeps) == 2


def test_from_env_reads_key(monkeypatch):
    monkeypatch.setenv("KGAGENT_API_KEY", "k")
    client = HttpChatClient.from_env("https://x.test")
    assert client._http.headers["authorization"] == "Bearer k"
    client.close()

