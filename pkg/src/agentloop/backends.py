"""Pluggable text-generation backends with a replayable call log.

Two backends: a deterministic scripted backend (the test oracle for every
pipeline property) and a remote chat-completion client. Both record every
call in an append-only log so any run can be replayed bit-for-bit.
"""

from __future__ import annotations

import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Iterator, Optional, Protocol, Sequence

import requests

from .core import AgentSpec, BackendKind, ChatTurn, ModelRef, Speaker
from .errors import BackendError, ScriptExhausted, ScriptMismatch

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CallRecord:
    agent_id: str
    messages: tuple[ChatTurn, ...]
    response: str


class CallLog:
    """Append-only, thread-safe sequence of generation calls."""

    def __init__(self):
        self._records: list[CallRecord] = []
        self._lock = threading.Lock()

    def append(self, record: CallRecord) -> None:
        with self._lock:
            self._records.append(record)

    def snapshot(self) -> list[CallRecord]:
        with self._lock:
            return list(self._records)

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)

    def __iter__(self) -> Iterator[CallRecord]:
        return iter(self.snapshot())


class Backend(Protocol):
    def complete(self, agent_id: str, messages: Sequence[ChatTurn], ref: ModelRef) -> str: ...


@dataclass
class ScriptEntry:
    text: str
    # Regex the rendered prompt (all non-system content) must match; a
    # mismatch is a hard error so mis-wired tests fail loudly.
    expect: Optional[str] = None


class ScriptedBackend:
    """Canned responses per agent, consumed strictly in call order."""

    def __init__(self):
        self._queues: dict[str, list[ScriptEntry]] = {}
        self._cursors: dict[str, int] = {}
        self._lock = threading.Lock()

    def push(self, agent_id: str, *texts: str, expect: Optional[str] = None) -> "ScriptedBackend":
        queue = self._queues.setdefault(agent_id, [])
        for text in texts:
            queue.append(ScriptEntry(text, expect))
        return self

    def push_entries(self, agent_id: str, entries: Sequence[ScriptEntry]) -> "ScriptedBackend":
        self._queues.setdefault(agent_id, []).extend(entries)
        return self

    def remaining(self, agent_id: str) -> int:
        with self._lock:
            return len(self._queues.get(agent_id, [])) - self._cursors.get(agent_id, 0)

    def complete(self, agent_id: str, messages: Sequence[ChatTurn], ref: ModelRef) -> str:
        with self._lock:
            index = self._cursors.get(agent_id, 0)
            queue = self._queues.get(agent_id, [])
            if index >= len(queue):
                raise ScriptExhausted(agent_id, index)
            entry = queue[index]
            self._cursors[agent_id] = index + 1
        if entry.expect is not None:
            prompt = "\n".join(t.content for t in messages if t.speaker is not Speaker.SYSTEM)
            if not re.search(entry.expect, prompt, re.DOTALL):
                raise ScriptMismatch(
                    f"{agent_id!r} call #{index}: prompt does not match expected pattern "
                    f"{entry.expect!r}"
                )
        return entry.text

    @classmethod
    def from_call_log(cls, records: Sequence[CallRecord]) -> "ScriptedBackend":
        """Rebuild a backend that replays a recorded run verbatim."""
        backend = cls()
        for rec in records:
            backend.push(rec.agent_id, rec.response)
        return backend


class RemoteChatBackend:
    """Minimal chat-completion HTTP client.

    Request: ``{model, messages, temperature, max_tokens}`` POSTed to
    ``<base_url>/chat/completions``; the first choice's message content is
    the output. Retries transport and 5xx failures with exponential backoff.
    """

    def __init__(
        self,
        base_url: Optional[str] = None,
        api_key: Optional[str] = None,
        max_attempts: int = 3,
        backoff_seconds: float = 1.0,
        timeout: float = 60.0,
        session: Optional[requests.Session] = None,
    ):
        self.base_url = (base_url or os.getenv("API_BASE_URL", "")).rstrip("/")
        self.api_key = api_key if api_key is not None else os.getenv("API_KEY", "")
        self.max_attempts = max_attempts
        self.backoff_seconds = backoff_seconds
        self.timeout = timeout
        self._session = session or requests.Session()
        if not self.base_url:
            raise BackendError("no API_BASE_URL configured for the remote backend")

    def complete(self, agent_id: str, messages: Sequence[ChatTurn], ref: ModelRef) -> str:
        payload = {
            "model": ref.model_name,
            "messages": [{"role": t.speaker.value, "content": t.content} for t in messages],
            "temperature": ref.decoding.temperature,
            "max_tokens": ref.decoding.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                resp = self._session.post(
                    f"{self.base_url}/chat/completions",
                    json=payload,
                    headers=headers,
                    timeout=self.timeout,
                )
            except requests.RequestException as exc:
                last_error = exc
            else:
                if resp.status_code < 400:
                    body = resp.json()
                    return body["choices"][0]["message"]["content"]
                if resp.status_code < 500:
                    # Client errors are not retryable: the request itself is wrong.
                    raise BackendError(
                        f"backend rejected request ({resp.status_code}): {resp.text[:500]}",
                        retryable=False,
                        attempts=attempt,
                    )
                last_error = BackendError(f"server error {resp.status_code}")
            if attempt < self.max_attempts:
                time.sleep(self.backoff_seconds * (2 ** (attempt - 1)))
        raise BackendError(
            f"request failed after {self.max_attempts} attempts: {last_error}",
            retryable=True,
            attempts=self.max_attempts,
        )


@dataclass
class Runtime:
    """Routes generation calls to the backend named by each agent's model ref."""

    backends: dict[BackendKind, Backend]
    call_log: CallLog = field(default_factory=CallLog)

    @classmethod
    def scripted(cls, backend: Optional[ScriptedBackend] = None) -> "Runtime":
        return cls(backends={BackendKind.SCRIPTED: backend or ScriptedBackend()})

    @property
    def script(self) -> ScriptedBackend:
        backend = self.backends[BackendKind.SCRIPTED]
        assert isinstance(backend, ScriptedBackend)
        return backend

    def generate(self, agent: AgentSpec, history: Sequence[ChatTurn]) -> str:
        """Run one generation call and record it in the call log.

        ``history`` must begin with exactly one system turn.
        """
        if not history or history[0].speaker is not Speaker.SYSTEM:
            raise ValueError("history must begin with a system turn")
        if any(t.speaker is Speaker.SYSTEM for t in history[1:]):
            raise ValueError("history must contain exactly one system turn")
        backend = self.backends.get(agent.model_ref.backend_kind)
        if backend is None:
            raise BackendError(f"no backend configured for {agent.model_ref.backend_kind.value}")
        response = backend.complete(agent.agent_id, history, agent.model_ref)
        self.call_log.append(CallRecord(agent.agent_id, tuple(history), response))
        return response

    def ask(self, agent: AgentSpec, user_prompt: str) -> str:
        """One-shot call: the agent's system prompt plus a single user turn."""
        return self.generate(
            agent,
            [ChatTurn(Speaker.SYSTEM, agent.system_prompt), ChatTurn(Speaker.USER, user_prompt)],
        )
