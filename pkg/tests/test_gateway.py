import json
import random

import httpx
import pytest

from mdtbench.errors import (
    DuplicateKey,
    GatewayTimeout,
    MalformedUpstreamResponse,
    RateLimited,
    ReplayMiss,
    ScriptExhausted,
    StorageFailure,
    Unauthorized,
)
from mdtbench.gateway import (
    ChatRequest,
    ChatResponse,
    DEFAULT_MAX_TOKENS,
    DEFAULT_TEMPERATURE,
    Gateway,
    LiveBackend,
    Message,
    RecordingSession,
    ReplayBackend,
    ScriptedBackend,
    read_transcript,
    request_digest,
    transcript_digest,
)


def make_request(tag="test", content="hello", model="m1"):
    return ChatRequest(
        model_id=model,
        messages=(Message("system", "You are a GP."), Message("user", content)),
        request_tag=tag,
    )


def test_with_defaults_fills_sampling_parameters():
    req = make_request()
    assert req.temperature is None
    filled = req.with_defaults()
    assert filled.temperature == DEFAULT_TEMPERATURE == 0.6
    assert filled.max_tokens == DEFAULT_MAX_TOKENS == 4096
    pinned = ChatRequest(
        model_id="m", messages=(Message("user", "x"),), temperature=0.0, max_tokens=16
    ).with_defaults()
    assert (pinned.temperature, pinned.max_tokens) == (0.0, 16)


def test_request_validation():
    with pytest.raises(ValueError):
        ChatRequest(model_id="m", messages=())
    with pytest.raises(ValueError):
        ChatRequest(model_id="m", messages=(Message("assistant", "hi"),))
    with pytest.raises(ValueError):
        Message("tool", "x")
    with pytest.raises(ValueError):
        ChatRequest(model_id="m", messages=(Message("user", "x"),), temperature=3.0)


def test_request_digest_depends_on_tag_and_contents_only():
    a = make_request(tag="t1", content="hello")
    assert request_digest(a) == request_digest(make_request(tag="t1", content="hello"))
    assert request_digest(a) != request_digest(make_request(tag="t2", content="hello"))
    assert request_digest(a) != request_digest(make_request(tag="t1", content="bye"))
    hot = ChatRequest(
        model_id="m1", messages=a.messages, request_tag="t1", temperature=1.5
    )
    assert request_digest(a) == request_digest(hot)


def test_scripted_backend_plays_in_order_then_exhausts():
    backend = ScriptedBackend(["one"]).push("two")
    assert backend.complete(make_request()).content == "one"
    assert backend.complete(make_request()).content == "two"
    with pytest.raises(ScriptExhausted):
        backend.complete(make_request())
    assert len(backend.requests_seen) == 3


# ----------------------------------------------------------------- live HTTP


def ok_payload(content="fine"):
    return {
        "choices": [{"message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
        "usage": {"prompt_tokens": 7, "completion_tokens": 3},
    }


def sequence_transport(statuses):
    calls = {"bodies": [], "count": 0}

    def handler(request: httpx.Request):
        calls["bodies"].append(json.loads(request.content))
        status = statuses[min(calls["count"], len(statuses) - 1)]
        calls["count"] += 1
        if status == 200:
            return httpx.Response(200, json=ok_payload())
        return httpx.Response(status, json={"error": "nope"})

    return httpx.MockTransport(handler), calls


def make_live(statuses, retry_cap=5):
    transport, calls = sequence_transport(statuses)
    sleeps = []
    backend = LiveBackend(
        "https://api.example.test/v1",
        credential="secret",
        retry_cap=retry_cap,
        transport=transport,
        sleeper=sleeps.append,
        rng=random.Random(7),
    )
    return backend, calls, sleeps


def test_live_backend_retries_rate_limit_and_reports_attempts():
    backend, calls, sleeps = make_live([429, 429, 200])
    response = backend.complete(make_request())
    assert response.content == "fine"
    assert response.attempt_count == 3
    assert calls["count"] == 3
    assert len(sleeps) == 2
    # exponential base doubles between attempts; jitter stays within [0.5x, 1.5x]
    assert 0.5 <= sleeps[0] <= 1.5
    assert 1.0 <= sleeps[1] <= 3.0
    assert sleeps[1] > sleeps[0]


def test_live_backend_exhausts_cap_with_rate_limited():
    backend, calls, _ = make_live([429], retry_cap=3)
    with pytest.raises(RateLimited) as err:
        backend.complete(make_request())
    assert err.value.attempts == 3
    assert calls["count"] == 3


def test_live_backend_retries_server_errors():
    backend, calls, _ = make_live([500, 503, 200])
    assert backend.complete(make_request()).attempt_count == 3


def test_live_backend_sends_protocol_payload_and_bearer():
    transport_calls = []

    def handler(request: httpx.Request):
        transport_calls.append(request)
        return httpx.Response(200, json=ok_payload())

    backend = LiveBackend(
        "https://api.example.test/v1/",
        credential="secret",
        transport=httpx.MockTransport(handler),
    )
    backend.complete(make_request(tag="goals", content="case text"))
    sent = transport_calls[0]
    assert str(sent.url) == "https://api.example.test/v1/chat/completions"
    assert sent.headers["authorization"] == "Bearer secret"
    body = json.loads(sent.content)
    assert body["model"] == "m1"
    assert body["temperature"] == DEFAULT_TEMPERATURE
    assert body["max_tokens"] == DEFAULT_MAX_TOKENS
    assert [m["role"] for m in body["messages"]] == ["system", "user"]


def test_live_backend_auth_failure_is_not_retried():
    backend, calls, _ = make_live([401])
    with pytest.raises(Unauthorized):
        backend.complete(make_request())
    assert calls["count"] == 1


def test_live_backend_rejects_malformed_upstream_body():
    def handler(_request):
        return httpx.Response(200, json={"choices": []})

    backend = LiveBackend("https://x.test", transport=httpx.MockTransport(handler))
    with pytest.raises(MalformedUpstreamResponse):
        backend.complete(make_request())


def test_live_backend_wraps_timeouts():
    def handler(_request):
        raise httpx.ConnectTimeout("slow")

    backend = LiveBackend("https://x.test", transport=httpx.MockTransport(handler))
    with pytest.raises(GatewayTimeout):
        backend.complete(make_request())


# ---------------------------------------------------------- record / replay


def record_two(tmp_path, run_id="run-a"):
    path = tmp_path / "transcript.jsonl"
    session = RecordingSession(run_id, path)
    gateway = Gateway(ScriptedBackend(["alpha", "beta"]), session)
    gateway.complete(make_request(tag="goals", content="case"), agent_id="gp")
    gateway.complete(make_request(tag="conflicts", content="case"), agent_id="gp", round=None)
    session.close()
    return path


def test_recording_writes_header_then_entries(tmp_path):
    path = record_two(tmp_path)
    lines = [json.loads(l) for l in path.read_text().splitlines()]
    assert lines[0]["kind"] == "header"
    assert lines[0]["schema_version"] == 1
    assert lines[0]["run_id"] == "run-a"
    header, entries = read_transcript(path)
    assert [e.sequence for e in entries] == [1, 2]
    assert entries[0].request.temperature == DEFAULT_TEMPERATURE
    assert entries[0].response.content == "alpha"


def test_recording_is_staged_until_close(tmp_path):
    path = tmp_path / "t.jsonl"
    session = RecordingSession("run-b", path)
    assert not path.exists()
    assert path.with_suffix(".jsonl.part").exists()
    session.close()
    assert path.exists()
    assert not path.with_suffix(".jsonl.part").exists()


def test_abandon_removes_partial_recording(tmp_path):
    path = tmp_path / "t.jsonl"
    session = RecordingSession("run-c", path)
    session.abandon()
    assert not path.exists()
    assert not path.with_suffix(".jsonl.part").exists()
    # the run_id is free again
    RecordingSession("run-c", tmp_path / "t2.jsonl").close()


def test_duplicate_open_session_rejected(tmp_path):
    session = RecordingSession("run-d", tmp_path / "a.jsonl")
    with pytest.raises(StorageFailure):
        RecordingSession("run-d", tmp_path / "b.jsonl")
    session.close()


def test_replay_answers_by_digest_not_position(tmp_path):
    path = record_two(tmp_path, run_id="run-e")
    replay = ReplayBackend(path)
    # ask in reverse order; matching is content-addressed
    assert replay.complete(make_request(tag="conflicts", content="case")).content == "beta"
    assert replay.complete(make_request(tag="goals", content="case")).content == "alpha"
    # idempotent: same request replays again
    assert replay.complete(make_request(tag="goals", content="case")).content == "alpha"


def test_replay_miss_names_the_request_tag(tmp_path):
    path = record_two(tmp_path, run_id="run-f")
    replay = ReplayBackend(path)
    with pytest.raises(ReplayMiss) as err:
        replay.complete(make_request(tag="goals", content="different prompt"))
    assert err.value.request_tag == "goals"


def test_replay_rejects_transcripts_with_duplicate_requests(tmp_path):
    path = tmp_path / "dup.jsonl"
    session = RecordingSession("run-g", path)
    gateway = Gateway(ScriptedBackend(["a", "b"]), session)
    gateway.complete(make_request(tag="goals"))
    gateway.complete(make_request(tag="goals"))
    session.close()
    with pytest.raises(DuplicateKey):
        ReplayBackend(path)


def test_gateway_applies_defaults_before_recording(tmp_path):
    path = tmp_path / "t.jsonl"
    session = RecordingSession("run-h", path)
    Gateway(ScriptedBackend(["x"]), session).complete(make_request())
    session.close()
    _header, entries = read_transcript(path)
    assert entries[0].request.temperature == DEFAULT_TEMPERATURE
    assert entries[0].request.max_tokens == DEFAULT_MAX_TOKENS
    # replay of the unfilled request still hits: defaults applied on lookup
    assert ReplayBackend(path).complete(make_request()).content == "x"


def test_transcript_digest_ignores_wall_clock_fields(tmp_path):
    path = record_two(tmp_path, run_id="run-i")
    _header, entries = read_transcript(path)
    rewritten = tmp_path / "later.jsonl"
    session = RecordingSession("run-i-copy", rewritten)
    for e in entries:
        session.record(e.agent_id, e.request, ChatResponse(
            content=e.response.content,
            finish_reason=e.response.finish_reason,
            prompt_tokens=e.response.prompt_tokens,
            completion_tokens=e.response.completion_tokens,
            latency=e.response.latency + 42.0,
        ), round=e.round)
    session.close()
    assert transcript_digest(path) == transcript_digest(rewritten)


def test_read_transcript_requires_header(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"kind": "entry"}\n')
    with pytest.raises(StorageFailure):
        read_transcript(bad)
