"""Chat-completion client with retry, rate limiting and transcripts.

Backends are callables ``backend(request) -> BackendReply``. The HTTP
backend speaks the common chat-completions JSON shape
(``{"model", "messages", ...}`` in, ``choices[0].message.content`` out);
scripted and replay backends make runs reproducible offline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

import httpx

log = logging.getLogger(__name__)


class LlmError(Exception):
    def __init__(self, message: str, exchange_id: str | None = None):
        super().__init__(message)
        self.exchange_id = exchange_id


class Exhausted(LlmError):
    pass


class AuthFailure(LlmError):
    pass


class Timeout(LlmError):
    pass


class ScriptExhausted(LlmError):
    pass


class ReplayMismatch(LlmError):
    pass


# raised by backends
class TransientError(Exception):
    """Transport failure or rate-limit signal; the client retries."""


class BackendTimeout(TransientError):
    pass


class BackendAuthError(Exception):
    pass


@dataclass(frozen=True)
class ModelConfig:
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-5-mini"
    temperature: float = 1.0
    max_tokens: int = 1024
    timeout_s: float = 60.0
    max_retries: int = 3
    api_key_env: str = "OPENAI_API_KEY"
    backoff_base_s: float = 1.0
    requests_per_minute: float | None = None
    system_prompt: str | None = None

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")
        if self.api_key_env and not self.api_key_env.replace("_", "").isalnum():
            raise ValueError("api_key_env must be an environment variable name, not a secret")

    @classmethod
    def from_json(cls, data: Mapping) -> "ModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown model config keys: {sorted(extra)}")
        return cls(**data)


@dataclass(frozen=True)
class BackendReply:
    text: str
    usage: Mapping[str, int] | None = None


@dataclass
class ChatExchange:
    id: str
    attempt: int
    request: dict
    response: str | None
    error: str | None
    latency_s: float
    timestamp: float
    usage: Mapping[str, int] | None = None
    tag: str | None = None

    def to_json(self, include_timing: bool = True) -> dict:
        out = asdict(self)
        if not include_timing:
            out.pop("latency_s")
            out.pop("timestamp")
        return out


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class TokenBucket:
    """Thread-safe token bucket limiting requests per minute."""

    def __init__(self, per_minute: float, clock=time.monotonic, sleep=time.sleep):
        if per_minute <= 0:
            raise ValueError("rate must be positive")
        self.rate = per_minute / 60.0
        self.capacity = max(1.0, per_minute / 60.0)
        self.tokens = self.capacity
        self.clock = clock
        self.sleep = sleep
        self.updated = clock()
        self.lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self.lock:
                now = self.clock()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1:
                    self.tokens -= 1
                    return
                wait = (1 - self.tokens) / self.rate
            self.sleep(wait)


class ScriptedBackend:
    """Replays canned responses.

    Ordered mode pops responses in sequence (optionally cycling); keyed mode
    looks up the SHA-256 of the prompt, so identical prompts always receive
    identical responses. A ``responder`` callable may be used instead.
    Entries that are ``{"error": "transient" | "timeout" | "auth"}`` make
    the backend raise the corresponding failure.
    """

    def __init__(
        self,
        responses: Iterable | Mapping[str, Any] | None = None,
        *,
        keyed: bool = False,
        cycle: bool = False,
        responder: Callable[[str], str] | None = None,
    ):
        self.keyed = keyed
        self.cycle = cycle
        self.responder = responder
        self.calls = 0
        self.lock = threading.Lock()
        if responder is None:
            if responses is None:
                raise ValueError("script needs responses or a responder")
            if keyed:
                self.table = dict(responses)
                if not self.table:
                    raise ValueError("empty keyed script")
            else:
                self.script = list(responses)
                if not self.script:
                    raise ValueError("empty script")
                self.queue = deque(self.script)

    @classmethod
    def from_spec(cls, spec: Mapping) -> "ScriptedBackend":
        mode = spec.get("mode", "ordered")
        if mode not in ("ordered", "keyed"):
            raise ValueError(f"unknown script mode {mode!r}")
        return cls(spec["responses"], keyed=mode == "keyed", cycle=bool(spec.get("cycle", False)))

    def _next(self, prompt: str):
        if self.responder is not None:
            return self.responder(prompt)
        if self.keyed:
            key = prompt_hash(prompt)
            if key not in self.table:
                raise ScriptExhausted(f"no scripted response for prompt {key[:12]}")
            return self.table[key]
        if not self.queue:
            if not self.cycle:
                raise ScriptExhausted(f"script exhausted after {self.calls} calls")
            self.queue.extend(self.script)
        return self.queue.popleft()

    def __call__(self, request: dict) -> BackendReply:
        prompt = request["messages"][-1]["content"]
        with self.lock:
            self.calls += 1
            entry = self._next(prompt)
        return _scripted_reply(entry)


def _scripted_reply(entry) -> BackendReply:
    if isinstance(entry, Mapping) and "error" in entry:
        kind = entry["error"]
        if kind == "timeout":
            raise BackendTimeout("scripted timeout")
        if kind == "auth":
            raise BackendAuthError("scripted auth failure")
        raise TransientError(f"scripted {kind} failure")
    return BackendReply(str(entry))


class ReplayBackend:
    """Re-issues a recorded transcript attempt by attempt.

    Each call must carry the same prompt as the recorded attempt; failures
    that were recorded are raised again so retry behaviour matches.
    """

    def __init__(self, exchanges: Iterable[Mapping]):
        self.queue = deque(exchanges)
        self.lock = threading.Lock()

    @classmethod
    def from_transcript(cls, path, tag: str | None = None) -> "ReplayBackend":
        rows = []
        for line in Path(path).read_text().splitlines():
            row = json.loads(line)
            if row.get("kind", "exchange") != "exchange":
                continue
            if tag is None or row.get("tag") == tag:
                rows.append(row)
        return cls(rows)

    def __call__(self, request: dict) -> BackendReply:
        prompt = request["messages"][-1]["content"]
        with self.lock:
            if not self.queue:
                raise ScriptExhausted("replay transcript exhausted")
            row = self.queue.popleft()
        recorded = row["request"]["messages"][-1]["content"]
        if recorded != prompt:
            raise ReplayMismatch(
                f"prompt differs from recorded exchange {row.get('id')} "
                f"({prompt_hash(prompt)[:12]} != {prompt_hash(recorded)[:12]})"
            )
        if row.get("error"):
            # recorded as "<kind>: <message>"; the client re-adds the kind
            kind, _, message = row["error"].partition(": ")
            if kind == "timeout":
                raise BackendTimeout(message)
            if kind == "auth":
                raise BackendAuthError(message)
            raise TransientError(message)
        return BackendReply(row["response"], row.get("usage"))


class HttpBackend:
    """POSTs chat-completions requests; reads the key from the environment."""

    RETRY_STATUS = {408, 409, 429, 500, 502, 503, 504}

    def __init__(self, config: ModelConfig, client: httpx.Client | None = None):
        self.config = config
        self.client = client or httpx.Client(timeout=config.timeout_s)

    def __call__(self, request: dict) -> BackendReply:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env, "") if self.config.api_key_env else ""
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            resp = self.client.post(self.config.endpoint, json=request, headers=headers)
        except httpx.TimeoutException as exc:
            raise BackendTimeout(str(exc) or "request timed out") from None
        except httpx.TransportError as exc:
            raise TransientError(f"transport: {exc}") from None
        if resp.status_code in (401, 403):
            raise BackendAuthError(f"HTTP {resp.status_code}")
        if resp.status_code in self.RETRY_STATUS:
            raise TransientError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise TransientError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        data = resp.json()
        text = data["choices"][0]["message"]["content"] or ""
        return BackendReply(text, data.get("usage"))


@dataclass
class LlmClient:
    """Provider-agnostic completion client.

    Every attempt, failed or not, is appended to ``transcript`` (and to
    ``transcript_path`` as JSON lines when given).
    """

    config: ModelConfig
    backend: Callable[[dict], BackendReply]
    tag: str | None = None
    transcript_path: Path | None = None
    rate_limiter: TokenBucket | None = None
    sleep: Callable[[float], None] = time.sleep
    clock: Callable[[], float] = time.time
    transcript: list[ChatExchange] = field(default_factory=list)

    def __post_init__(self):
        self._lock = threading.Lock()
        self._seq = 0

    def _request(self, prompt: str) -> dict:
        messages = []
        if self.config.system_prompt:
            messages.append({"role": "system", "content": self.config.system_prompt})
        messages.append({"role": "user", "content": prompt})
        return {
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }

    def _log(self, exchange: ChatExchange) -> None:
        with self._lock:
            self.transcript.append(exchange)
            if self.transcript_path is not None:
                with open(self.transcript_path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(exchange.to_json()) + "\n")

    def _next_id(self) -> str:
        with self._lock:
            self._seq += 1
            prefix = f"{self.tag}-" if self.tag else ""
            return f"{prefix}{self._seq}"

    def complete(self, prompt: str) -> str:
        request = self._request(prompt)
        attempts = self.config.max_retries + 1
        last_id = None
        last_exc: Exception | None = None
        for attempt in range(1, attempts + 1):
            if self.rate_limiter is not None:
                self.rate_limiter.acquire()
            ex_id = self._next_id()
            last_id = ex_id
            started = self.clock()
            t0 = time.perf_counter()
            try:
                reply = self.backend(request)
            except BackendAuthError as exc:
                self._log(ChatExchange(ex_id, attempt, request, None, f"auth: {exc}",
                                       time.perf_counter() - t0, started, tag=self.tag))
                raise AuthFailure(str(exc), ex_id) from None
            except TransientError as exc:
                kind = "timeout" if isinstance(exc, BackendTimeout) else "transient"
                self._log(ChatExchange(ex_id, attempt, request, None, f"{kind}: {exc}",
                                       time.perf_counter() - t0, started, tag=self.tag))
                last_exc = exc
                if attempt < attempts:
                    delay = self.config.backoff_base_s * 2 ** (attempt - 1)
                    log.warning("attempt %d failed (%s); retrying in %.1fs", attempt, exc, delay)
                    self.sleep(delay)
                continue
            self._log(ChatExchange(ex_id, attempt, request, reply.text, None,
                                   time.perf_counter() - t0, started, reply.usage, tag=self.tag))
            return reply.text
        if isinstance(last_exc, BackendTimeout):
            raise Timeout(f"timed out after {attempts} attempts", last_id)
        raise Exhausted(f"gave up after {attempts} attempts: {last_exc}", last_id)
