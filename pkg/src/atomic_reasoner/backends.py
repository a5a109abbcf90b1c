"""Pluggable completion backends.

Every backend satisfies one contract: ``complete(CompletionRequest) ->
CompletionResult`` and is safe to call concurrently.  Three implementations
ship here: a deterministic scripted backend for tests and replays, an HTTP
client for OpenAI-compatible chat endpoints, and a record/replay cache that
wraps either.
"""

from __future__ import annotations

import enum
import hashlib
import json
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import requests

from .errors import (
    AuthError,
    BackendTimeout,
    MalformedResponse,
    RateLimited,
    ScriptExhausted,
)

TAGS = ("routing", "solve", "check", "summarize", "triage")


@dataclass(frozen=True)
class ChatMessage:
    role: str  # "system" | "user" | "assistant"
    content: str


@dataclass
class CompletionRequest:
    messages: list[ChatMessage]
    temperature: float = 0.7
    max_tokens: int = 2048
    seed: Optional[int] = None
    tag: str = "solve"

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature out of range [0, 2]")
        if self.tag not in TAGS:
            raise ValueError(f"unknown request tag: {self.tag}")


class ResultSource(enum.Enum):
    NETWORK = "Network"
    SCRIPT = "Script"
    CACHE = "Cache"


@dataclass
class CompletionResult:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_ms: float = 0.0
    source: ResultSource = ResultSource.SCRIPT


# --- scripted backend ---------------------------------------------------------

ScriptValue = Union[list, str]


class ScriptedBackend:
    """Deterministic, network-free backend.

    The script is either a single FIFO queue of responses, or a mapping from
    request tag to a queue.  A mapping value may be a plain string, meaning
    "always answer this" for that tag.  An optional ``default`` (string or
    ``callable(request) -> str``) serves any exhausted queue instead of
    raising ScriptExhausted.
    """

    def __init__(
        self,
        script: Union[list, dict[str, ScriptValue]],
        default: Union[str, Callable[[CompletionRequest], str], None] = None,
    ):
        self._lock = threading.Lock()
        self._default = default
        if isinstance(script, dict):
            self._queues: Optional[dict[str, list]] = {
                tag: list(value) if isinstance(value, list) else value
                for tag, value in script.items()
            }
            self._queue: Optional[list] = None
        else:
            self._queues = None
            self._queue = list(script)
        self.calls: list[CompletionRequest] = []

    def _next(self, request: CompletionRequest) -> str:
        if self._queues is not None:
            entry = self._queues.get(request.tag)
            if isinstance(entry, str):
                return entry
            if entry:
                return entry.pop(0)
        elif self._queue:
            return self._queue.pop(0)
        if self._default is not None:
            if callable(self._default):
                return self._default(request)
            return self._default
        raise ScriptExhausted(f"no scripted response left (tag={request.tag})")

    def complete(self, request: CompletionRequest) -> CompletionResult:
        with self._lock:
            self.calls.append(request)
            text = self._next(request)
        return CompletionResult(
            text=text,
            prompt_tokens=sum(len(m.content.split()) for m in request.messages),
            completion_tokens=len(text.split()),
            source=ResultSource.SCRIPT,
        )


# --- HTTP backend -------------------------------------------------------------

@dataclass
class HttpConfig:
    base_url: str
    model: str = "gpt-4o-mini"
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 120.0
    max_retries: int = 5
    backoff_base: float = 1.0
    backoff_factor: float = 2.0
    max_concurrent: int = 4
    requests_per_second: Optional[float] = None


class _TokenBucket:
    def __init__(self, rate: float, capacity: Optional[float] = None):
        self.rate = rate
        self.capacity = capacity if capacity is not None else max(1.0, rate)
        self.tokens = self.capacity
        self.updated = time.monotonic()
        self.lock = threading.Lock()

    def acquire(self, sleep=time.sleep) -> None:
        while True:
            with self.lock:
                now = time.monotonic()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            sleep(wait)


class HttpBackend:
    """OpenAI-compatible chat-completions client with retry and backoff.

    Retries Timeout/429/5xx with exponential backoff (base 1 s, factor 2,
    jitter), up to ``max_retries`` extra attempts.  API keys are read from
    the environment only.
    """

    def __init__(
        self,
        config: HttpConfig,
        session: Optional[requests.Session] = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: Optional[random.Random] = None,
    ):
        self.config = config
        self.model = config.model
        self._session = session or requests.Session()
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._semaphore = threading.Semaphore(config.max_concurrent)
        self._bucket = (
            _TokenBucket(config.requests_per_second)
            if config.requests_per_second
            else None
        )

    def _headers(self) -> dict[str, str]:
        import os

        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, request: CompletionRequest) -> CompletionResult:
        body = {
            "model": self.config.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        if request.seed is not None:
            body["seed"] = request.seed

        url = self.config.base_url.rstrip("/") + "/chat/completions"
        last_error: Exception = BackendTimeout("no attempt made")
        with self._semaphore:
            for attempt in range(self.config.max_retries + 1):
                if self._bucket is not None:
                    self._bucket.acquire(self._sleep)
                started = time.monotonic()
                try:
                    response = self._session.post(
                        url,
                        json=body,
                        headers=self._headers(),
                        timeout=self.config.timeout,
                    )
                except requests.Timeout:
                    last_error = BackendTimeout(f"request timed out after {self.config.timeout}s")
                    self._backoff(attempt)
                    continue
                except requests.RequestException as exc:
                    last_error = BackendTimeout(f"connection error: {exc}")
                    self._backoff(attempt)
                    continue

                latency = (time.monotonic() - started) * 1000.0
                if response.status_code in (401, 403):
                    raise AuthError(f"auth failed with status {response.status_code}")
                if response.status_code == 429 or response.status_code >= 500:
                    retry_after = _parse_retry_after(response)
                    last_error = RateLimited(
                        f"status {response.status_code}", retry_after=retry_after
                    ) if response.status_code == 429 else BackendTimeout(
                        f"server error {response.status_code}"
                    )
                    self._backoff(attempt, floor=retry_after)
                    continue
                if response.status_code != 200:
                    raise MalformedResponse(
                        f"unexpected status {response.status_code}",
                        excerpt=response.text[:200],
                    )
                return self._parse(response, latency)
        raise last_error

    def _backoff(self, attempt: int, floor: Optional[float] = None) -> None:
        if attempt >= self.config.max_retries:
            return
        delay = self.config.backoff_base * (self.config.backoff_factor ** attempt)
        delay *= 0.5 + self._rng.random()  # jitter in [0.5x, 1.5x)
        if floor is not None:
            delay = max(delay, floor)
        self._sleep(delay)

    @staticmethod
    def _parse(response: requests.Response, latency_ms: float) -> CompletionResult:
        try:
            payload = response.json()
            text = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise MalformedResponse("unparseable completion body", excerpt=response.text[:200])
        if not isinstance(text, str):
            raise MalformedResponse("completion content is not text", excerpt=response.text[:200])
        usage = payload.get("usage") or {}
        return CompletionResult(
            text=text,
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
            latency_ms=latency_ms,
            source=ResultSource.NETWORK,
        )


def _parse_retry_after(response: requests.Response) -> Optional[float]:
    value = response.headers.get("Retry-After")
    if value is None:
        return None
    try:
        return float(value)
    except ValueError:
        return None


# --- record/replay cache --------------------------------------------------------

class CacheMode(enum.Enum):
    RECORD = "record"
    REPLAY = "replay"
    PASSTHROUGH = "passthrough"


def cache_key(request: CompletionRequest, model: str) -> str:
    canonical = json.dumps(
        {
            "model": model,
            "messages": [[m.role, m.content] for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "seed": request.seed,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class CacheBackend:
    """Record/replay layer over another backend; one file per key."""

    def __init__(
        self,
        inner,
        mode: CacheMode,
        store_path: Union[str, Path],
        strict: bool = True,
    ):
        self.inner = inner
        self.mode = mode
        self.strict = strict
        self.store = Path(store_path)
        self.model = getattr(inner, "model", "scripted")
        self._lock = threading.Lock()
        if mode is CacheMode.RECORD:
            self.store.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.store / f"{key}.json"

    def complete(self, request: CompletionRequest) -> CompletionResult:
        if self.mode is CacheMode.PASSTHROUGH:
            return self.inner.complete(request)
        key = cache_key(request, self.model)
        path = self._path(key)

        if self.mode is CacheMode.REPLAY:
            if path.exists():
                return self._load(path)
            if self.strict:
                raise MalformedResponse("cache miss", excerpt=key)
            return self.inner.complete(request)

        # record mode
        if path.exists():
            return self._load(path)
        result = self.inner.complete(request)
        record = {
            "request": {
                "messages": [[m.role, m.content] for m in request.messages],
                "temperature": request.temperature,
                "max_tokens": request.max_tokens,
                "seed": request.seed,
                "tag": request.tag,
            },
            "result": {
                "text": result.text,
                "prompt_tokens": result.prompt_tokens,
                "completion_tokens": result.completion_tokens,
            },
        }
        with self._lock:
            path.write_text(
                json.dumps(record, sort_keys=True, ensure_ascii=False, indent=2),
                encoding="utf-8",
            )
        return result

    @staticmethod
    def _load(path: Path) -> CompletionResult:
        try:
            record = json.loads(path.read_text(encoding="utf-8"))
            stored = record["result"]
            return CompletionResult(
                text=stored["text"],
                prompt_tokens=int(stored.get("prompt_tokens", 0)),
                completion_tokens=int(stored.get("completion_tokens", 0)),
                source=ResultSource.CACHE,
            )
        except (ValueError, KeyError) as exc:
            raise MalformedResponse(f"corrupt cache entry {path.name}: {exc}")


class TallyBackend:
    """Wrapper that accumulates usage and latency across calls (thread-safe)."""

    def __init__(self, inner):
        self.inner = inner
        self.model = getattr(inner, "model", "scripted")
        self._lock = threading.Lock()
        self.calls = 0
        self.prompt_tokens = 0
        self.completion_tokens = 0
        self.latency_ms = 0.0

    def complete(self, request: CompletionRequest) -> CompletionResult:
        result = self.inner.complete(request)
        with self._lock:
            self.calls += 1
            self.prompt_tokens += result.prompt_tokens
            self.completion_tokens += result.completion_tokens
            self.latency_ms += result.latency_ms
        return result
