"""Uniform chat-completion access: live HTTP, scripted, and record/replay.

The live backend speaks the OpenAI-compatible chat-completions protocol
(POST with bearer credential). Rate limits and transient 5xx errors are
retried with exponential backoff and jitter (base 1s) up to a configurable
attempt cap, then surfaced. Credentials come only from the environment so
transcripts stay shareable.

Every successful completion made through a :class:`Gateway` is appended to
the active recording as one JSONL transcript entry; a replay backend built
from such a transcript answers later runs deterministically, matching
requests by a stable digest of (request_tag, message contents) rather than
by sequence position.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Protocol

import httpx

from .errors import (
    DuplicateKey,
    GatewayError,
    GatewayTimeout,
    MalformedUpstreamResponse,
    RateLimited,
    ReplayMiss,
    ScriptExhausted,
    StorageFailure,
    Unauthorized,
)

TRANSCRIPT_SCHEMA_VERSION = 1

DEFAULT_TEMPERATURE = 0.6
DEFAULT_MAX_TOKENS = 4096
DEFAULT_RETRY_CAP = 5
BACKOFF_BASE_SECONDS = 1.0

ENV_ENDPOINT = "MDTBENCH_ENDPOINT"
ENV_CREDENTIAL = "MDTBENCH_API_KEY"
ENV_CONCURRENCY = "MDTBENCH_CONCURRENCY"

ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    messages: tuple[Message, ...]
    temperature: float | None = None
    max_tokens: int | None = None
    request_tag: str = ""

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.messages[0].role == "assistant":
            raise ValueError("first message must be system or user")
        if self.temperature is not None and not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")

    def with_defaults(self) -> "ChatRequest":
        return replace(
            self,
            temperature=DEFAULT_TEMPERATURE if self.temperature is None else self.temperature,
            max_tokens=DEFAULT_MAX_TOKENS if self.max_tokens is None else self.max_tokens,
        )


@dataclass(frozen=True)
class ChatResponse:
    content: str
    finish_reason: str = "stop"
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency: float = 0.0
    attempt_count: int = 1

    def __post_init__(self):
        if self.attempt_count < 1:
            raise ValueError("attempt_count must be >= 1")


@dataclass(frozen=True)
class TranscriptEntry:
    sequence: int
    agent_id: str
    request: ChatRequest
    response: ChatResponse
    round: int | None = None
    timestamp: str = ""


def request_digest(request: ChatRequest) -> str:
    """Stable digest of (request_tag, message contents) used for replay lookup."""
    h = hashlib.sha256()
    h.update(request.request_tag.encode("utf-8"))
    for m in request.messages:
        h.update(b"\x00")
        h.update(m.role.encode("utf-8"))
        h.update(b"\x1f")
        h.update(m.content.encode("utf-8"))
    return h.hexdigest()


class Backend(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


# --------------------------------------------------------------- live HTTP


class LiveBackend:
    """OpenAI-compatible chat-completions client with bounded retries.

    A process-wide concurrency limit (``MDTBENCH_CONCURRENCY``) bounds
    in-flight requests across runs; within one run the workflow is
    sequential anyway.
    """

    def __init__(
        self,
        endpoint: str,
        credential: str | None = None,
        retry_cap: int = DEFAULT_RETRY_CAP,
        timeout: float = 120.0,
        transport: httpx.BaseTransport | None = None,
        sleeper: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
        concurrency: int | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.credential = credential if credential is not None else os.environ.get(ENV_CREDENTIAL, "")
        self.retry_cap = retry_cap
        self._sleep = sleeper
        self._rng = rng or random.Random()
        self._client = httpx.Client(timeout=timeout, transport=transport)
        import threading

        limit = concurrency or int(os.environ.get(ENV_CONCURRENCY, "4"))
        self._slots = threading.BoundedSemaphore(max(1, limit))

    @classmethod
    def from_env(cls, **kwargs) -> "LiveBackend":
        endpoint = os.environ.get(ENV_ENDPOINT, "")
        if not endpoint:
            raise GatewayError(f"{ENV_ENDPOINT} not set and no --endpoint given")
        return cls(endpoint, **kwargs)

    def close(self):
        self._client.close()

    def complete(self, request: ChatRequest) -> ChatResponse:
        request = request.with_defaults()
        payload = {
            "model": request.model_id,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.credential:
            headers["Authorization"] = f"Bearer {self.credential}"
        url = f"{self.endpoint}/chat/completions"

        started = time.monotonic()
        last_status = None
        with self._slots:
            for attempt in range(1, self.retry_cap + 1):
                try:
                    http_response = self._client.post(url, json=payload, headers=headers)
                except httpx.TimeoutException as exc:
                    raise GatewayTimeout(f"{request.request_tag}: {exc}") from exc

                last_status = http_response.status_code
                if http_response.status_code in (401, 403):
                    raise Unauthorized(f"{http_response.status_code} from {url}")
                if http_response.status_code == 429 or http_response.status_code >= 500:
                    if attempt < self.retry_cap:
                        delay = BACKOFF_BASE_SECONDS * (2 ** (attempt - 1))
                        self._sleep(delay * (0.5 + self._rng.random()))
                        continue
                    break
                if http_response.status_code != 200:
                    raise GatewayError(f"unexpected status {http_response.status_code} from {url}")
                return self._parse(http_response, attempt, time.monotonic() - started)

        raise RateLimited(
            f"gave up after {self.retry_cap} attempts (last status {last_status})",
            attempts=self.retry_cap,
        )

    @staticmethod
    def _parse(http_response: httpx.Response, attempt: int, latency: float) -> ChatResponse:
        try:
            body = http_response.json()
            choice = body["choices"][0]
            content = choice["message"]["content"]
            finish = choice.get("finish_reason", "stop")
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedUpstreamResponse(str(exc)) from exc
        usage = body.get("usage") or {}
        return ChatResponse(
            content=content,
            finish_reason=finish or "stop",
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
            latency=latency,
            attempt_count=attempt,
        )


# ----------------------------------------------------------------- scripted


class ScriptedBackend:
    """Answers from an ordered queue of canned replies; used for tests and
    fixture generation."""

    def __init__(self, replies: list[str] | None = None):
        self._replies: list[str] = list(replies or [])
        self.requests_seen: list[ChatRequest] = []

    def push(self, reply: str) -> "ScriptedBackend":
        self._replies.append(reply)
        return self

    def complete(self, request: ChatRequest) -> ChatResponse:
        self.requests_seen.append(request)
        if not self._replies:
            raise ScriptExhausted(f"no scripted reply left for {request.request_tag!r}")
        return ChatResponse(content=self._replies.pop(0))


# ------------------------------------------------------------------- replay


class ReplayBackend:
    """Deterministic backend answering from a recorded transcript."""

    def __init__(self, transcript_path: str | Path):
        self.path = Path(transcript_path)
        header, entries = read_transcript(self.path)
        self.run_id = header.get("run_id", "")
        self._responses: dict[str, ChatResponse] = {}
        for entry in entries:
            digest = request_digest(entry.request)
            if digest in self._responses:
                raise DuplicateKey(
                    f"transcript {self.path} has two entries for request_tag="
                    f"{entry.request.request_tag!r}"
                )
            self._responses[digest] = entry.response

    def complete(self, request: ChatRequest) -> ChatResponse:
        digest = request_digest(request.with_defaults())
        try:
            return self._responses[digest]
        except KeyError:
            raise ReplayMiss(request.request_tag) from None


# ---------------------------------------------------------------- recording


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


_OPEN_RUN_IDS: set[str] = set()


class RecordingSession:
    """Single-writer JSONL transcript for one run.

    Writes to ``<path>.part`` and renames on close so an interrupted run
    never leaves a plausible-looking transcript behind.
    """

    def __init__(self, run_id: str, path: str | Path):
        self.run_id = run_id
        self.path = Path(path)
        self._sequence = 0
        if run_id in _OPEN_RUN_IDS:
            raise StorageFailure(f"run_id {run_id!r} already has an open recording session")
        if self.path.exists():
            raise StorageFailure(f"transcript already exists at {self.path}")
        self._part = self.path.with_suffix(self.path.suffix + ".part")
        try:
            self._handle = self._part.open("w", encoding="utf-8")
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc
        _OPEN_RUN_IDS.add(run_id)
        self._write_line(
            {
                "kind": "header",
                "schema_version": TRANSCRIPT_SCHEMA_VERSION,
                "run_id": run_id,
                "created_at": _utc_now(),
            }
        )

    def _write_line(self, doc: dict):
        self._handle.write(json.dumps(doc, ensure_ascii=False) + "\n")
        self._handle.flush()

    def record(self, agent_id: str, request: ChatRequest, response: ChatResponse,
               round: int | None = None) -> TranscriptEntry:
        self._sequence += 1
        entry = TranscriptEntry(
            sequence=self._sequence,
            agent_id=agent_id,
            request=request,
            response=response,
            round=round,
            timestamp=_utc_now(),
        )
        self._write_line(entry_to_doc(entry))
        return entry

    @property
    def entry_count(self) -> int:
        return self._sequence

    def close(self) -> Path:
        self._handle.close()
        self._part.rename(self.path)
        _OPEN_RUN_IDS.discard(self.run_id)
        return self.path

    def abandon(self):
        """Discard a partial recording (failed run); the final transcript
        path is never created."""
        if not self._handle.closed:
            self._handle.close()
        if self._part.exists():
            self._part.unlink()
        _OPEN_RUN_IDS.discard(self.run_id)


def open_recording(run_id: str, path: str | Path) -> RecordingSession:
    return RecordingSession(run_id, path)


def close_recording(session: RecordingSession) -> Path:
    return session.close()


class Gateway:
    """Front door the workflow talks to: applies sampling defaults, delegates
    to the configured backend, and appends every exchange to the recording."""

    def __init__(self, backend: Backend, session: RecordingSession | None = None):
        self.backend = backend
        self.session = session
        self.completed = 0

    def complete(self, request: ChatRequest, agent_id: str = "gp",
                 round: int | None = None) -> ChatResponse:
        request = request.with_defaults()
        response = self.backend.complete(request)
        self.completed += 1
        if self.session is not None:
            self.session.record(agent_id, request, response, round=round)
        return response


# ------------------------------------------------------------ transcript IO


def entry_to_doc(entry: TranscriptEntry) -> dict:
    return {
        "kind": "entry",
        "sequence": entry.sequence,
        "agent_id": entry.agent_id,
        "round": entry.round,
        "timestamp": entry.timestamp,
        "request": {
            "model_id": entry.request.model_id,
            "messages": [{"role": m.role, "content": m.content} for m in entry.request.messages],
            "temperature": entry.request.temperature,
            "max_tokens": entry.request.max_tokens,
            "request_tag": entry.request.request_tag,
        },
        "response": {
            "content": entry.response.content,
            "finish_reason": entry.response.finish_reason,
            "usage": {
                "prompt_tokens": entry.response.prompt_tokens,
                "completion_tokens": entry.response.completion_tokens,
            },
            "latency": entry.response.latency,
            "attempt_count": entry.response.attempt_count,
        },
    }


def entry_from_doc(doc: dict) -> TranscriptEntry:
    req = doc["request"]
    resp = doc["response"]
    usage = resp.get("usage") or {}
    return TranscriptEntry(
        sequence=doc["sequence"],
        agent_id=doc["agent_id"],
        round=doc.get("round"),
        timestamp=doc.get("timestamp", ""),
        request=ChatRequest(
            model_id=req["model_id"],
            messages=tuple(Message(m["role"], m["content"]) for m in req["messages"]),
            temperature=req.get("temperature"),
            max_tokens=req.get("max_tokens"),
            request_tag=req.get("request_tag", ""),
        ),
        response=ChatResponse(
            content=resp["content"],
            finish_reason=resp.get("finish_reason", "stop"),
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
            latency=float(resp.get("latency", 0.0)),
            attempt_count=int(resp.get("attempt_count", 1)),
        ),
    )


def read_transcript(path: str | Path) -> tuple[dict, list[TranscriptEntry]]:
    p = Path(path)
    if not p.exists():
        raise StorageFailure(f"transcript not found: {p}")
    header: dict | None = None
    entries: list[TranscriptEntry] = []
    with p.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StorageFailure(f"{p}:{lineno}: invalid JSON: {exc}") from exc
            if doc.get("kind") == "header":
                header = doc
            else:
                try:
                    entries.append(entry_from_doc(doc))
                except (KeyError, TypeError, ValueError) as exc:
                    raise StorageFailure(f"{p}:{lineno}: malformed entry: {exc}") from exc
    if header is None:
        raise StorageFailure(f"{p}: missing header line")
    return header, entries


def transcript_digest(path: str | Path) -> str:
    """Digest over the semantic content of a transcript (requests, responses,
    ordering), excluding wall-clock fields, so replayed runs compare equal."""
    header, entries = read_transcript(path)
    h = hashlib.sha256()
    h.update(str(header.get("schema_version")).encode())
    for e in entries:
        h.update(f"{e.sequence}|{e.agent_id}|{e.round}".encode())
        h.update(request_digest(e.request).encode())
        h.update(hashlib.sha256(e.response.content.encode("utf-8")).hexdigest().encode())
    return h.hexdigest()
