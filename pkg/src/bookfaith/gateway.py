"""Uniform completion interface over chat-completion backends.

Provides a deterministic offline mock for tests and pipelines, an HTTPS
backend speaking the common chat-completions JSON shape, retry with
exponential backoff for transient transport failures, a per-backend
in-flight cap, and cost accounting per completion.
"""

from __future__ import annotations

import hashlib
import os
import re
import threading
import time
from dataclasses import dataclass

import httpx

DEFAULT_MAX_OUTPUT_TOKENS = 900

RETRY_BASE_SECONDS = 1.0
RETRY_FACTOR = 2.0
RETRY_MAX_ATTEMPTS = 5


class GatewayError(Exception):
    pass


class ContextOverflow(GatewayError):
    """Prompt plus reserved output would not fit the backend window."""


class TransportFailure(GatewayError):
    """Transport-level failure, raised after retries are exhausted or
    immediately for non-transient errors."""


class BackendRefusal(GatewayError):
    """The backend answered with an empty body; surfaced, never retried."""


class _Transient(Exception):
    """Internal marker for retryable transport errors."""


def _whitespace_count(text: str) -> int:
    return len(text.split())


@dataclass(frozen=True)
class BackendConfig:
    name: str
    context_window: int
    input_price: float = 0.0  # currency per 1M input tokens
    output_price: float = 0.0  # currency per 1M output tokens
    max_parallel: int = 4
    timeout: float = 120.0
    endpoint: str | None = None  # chat-completions URL; None for the mock
    model: str | None = None

    def __post_init__(self):
        if self.context_window < 1:
            raise ValueError("context_window must be >= 1")
        if self.input_price < 0 or self.output_price < 0:
            raise ValueError("prices must be >= 0")
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")


@dataclass(frozen=True)
class PromptRequest:
    user: str
    system: str | None = None
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    temperature: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")


@dataclass(frozen=True)
class Completion:
    text: str
    input_tokens: int
    output_tokens: int
    cost: float
    backend: str


@dataclass(frozen=True)
class RawCompletion:
    text: str
    input_tokens: int
    output_tokens: int


class Backend:
    """A configured completion provider: config plus a send() transport."""

    def __init__(self, config: BackendConfig):
        self.config = config

    def send(self, request: PromptRequest) -> RawCompletion:
        raise NotImplementedError


class MockBackend(Backend):
    """Offline deterministic backend.

    Looks the user prompt up in the fixture table (exact match first, then
    the longest fixture key contained in the prompt); everything else gets
    a stable digest stub ``MOCK(<8-hex>)``. Token usage is whitespace
    counts. The transport is a pure function: no state, safe under any
    parallelism.
    """

    def __init__(self, config: BackendConfig | None = None, fixtures: dict[str, str] | None = None):
        super().__init__(config or BackendConfig(name="mock", context_window=1_000_000, max_parallel=8))
        self.fixtures = dict(fixtures or {})
        self._keys_by_length = sorted(self.fixtures, key=lambda k: (-len(k), k))

    def send(self, request: PromptRequest) -> RawCompletion:
        text = self._response_for(request.user)
        prompt_tokens = _whitespace_count(request.system or "") + _whitespace_count(request.user)
        return RawCompletion(text=text, input_tokens=prompt_tokens, output_tokens=_whitespace_count(text))

    def _response_for(self, user: str) -> str:
        if user in self.fixtures:
            return self.fixtures[user]
        for key in self._keys_by_length:
            if key in user:
                return self.fixtures[key]
        digest = hashlib.sha256(user.encode("utf-8")).hexdigest()[:8]
        return f"MOCK({digest})"


def mock_backend(fixtures: dict[str, str] | None = None, **config_overrides) -> MockBackend:
    defaults = dict(name="mock", context_window=1_000_000, max_parallel=8)
    defaults.update(config_overrides)
    return MockBackend(BackendConfig(**defaults), fixtures)


def _api_key_variable(backend_name: str) -> str:
    return re.sub(r"[^A-Za-z0-9]", "_", backend_name).upper() + "_API_KEY"


class HttpBackend(Backend):
    """Remote chat-completions backend over HTTPS with JSON bodies.

    Credentials come from the ``<BACKEND_NAME>_API_KEY`` environment
    variable. Connection errors, timeouts, 429s and 5xx responses are
    transient; other HTTP errors are not.
    """

    def __init__(self, config: BackendConfig, client: httpx.Client | None = None):
        if not config.endpoint:
            raise ValueError(f"backend {config.name!r} has no endpoint")
        super().__init__(config)
        self._client = client or httpx.Client(timeout=config.timeout)

    def send(self, request: PromptRequest) -> RawCompletion:
        messages = []
        if request.system:
            messages.append({"role": "system", "content": request.system})
        messages.append({"role": "user", "content": request.user})
        payload = {
            "model": self.config.model or self.config.name,
            "messages": messages,
            "max_tokens": request.max_output_tokens,
            "temperature": request.temperature,
        }
        headers = {}
        api_key = os.environ.get(_api_key_variable(self.config.name))
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        try:
            response = self._client.post(self.config.endpoint, json=payload, headers=headers)
        except (httpx.TransportError, httpx.TimeoutException) as exc:
            raise _Transient(str(exc)) from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise _Transient(f"HTTP {response.status_code}")
        if response.status_code >= 400:
            raise TransportFailure(f"{self.config.name}: HTTP {response.status_code}: {response.text[:200]}")
        body = response.json()
        try:
            text = body["choices"][0]["message"]["content"] or ""
            usage = body.get("usage", {})
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportFailure(f"{self.config.name}: malformed response body") from exc
        return RawCompletion(
            text=text,
            input_tokens=int(usage.get("prompt_tokens", 0)),
            output_tokens=int(usage.get("completion_tokens", 0)),
        )


def completion_cost(config: BackendConfig, input_tokens: int, output_tokens: int) -> float:
    return input_tokens * config.input_price / 1_000_000 + output_tokens * config.output_price / 1_000_000


class Gateway:
    """Dispatches prompt requests with window checks, retries, and a
    per-backend cap on in-flight requests."""

    def __init__(self, token_counter=None, sleeper=time.sleep):
        self._count = token_counter or _whitespace_count
        self._sleep = sleeper
        self._limiters: dict[str, threading.Semaphore] = {}
        self._limiters_lock = threading.Lock()

    def _limiter(self, backend: Backend) -> threading.Semaphore:
        with self._limiters_lock:
            sem = self._limiters.get(backend.config.name)
            if sem is None:
                sem = threading.Semaphore(backend.config.max_parallel)
                self._limiters[backend.config.name] = sem
            return sem

    def prompt_tokens(self, request: PromptRequest) -> int:
        total = self._count(request.user)
        if request.system:
            total += self._count(request.system)
        return total

    def check_window(self, request: PromptRequest, config: BackendConfig) -> None:
        needed = self.prompt_tokens(request) + request.max_output_tokens
        if needed > config.context_window:
            raise ContextOverflow(
                f"{config.name}: prompt + reserved output needs {needed} tokens, window is {config.context_window}"
            )

    def complete(self, request: PromptRequest, backend: Backend) -> Completion:
        self.check_window(request, backend.config)
        delay = RETRY_BASE_SECONDS
        last_error: Exception | None = None
        for attempt in range(RETRY_MAX_ATTEMPTS):
            try:
                with self._limiter(backend):
                    raw = backend.send(request)
                break
            except _Transient as exc:
                last_error = exc
                if attempt == RETRY_MAX_ATTEMPTS - 1:
                    raise TransportFailure(
                        f"{backend.config.name}: {RETRY_MAX_ATTEMPTS} attempts failed: {exc}"
                    ) from exc
                self._sleep(delay)
                delay *= RETRY_FACTOR
        else:  # pragma: no cover - loop always breaks or raises
            raise TransportFailure(str(last_error))
        if not raw.text.strip():
            raise BackendRefusal(f"{backend.config.name} returned an empty completion")
        return Completion(
            text=raw.text,
            input_tokens=raw.input_tokens,
            output_tokens=raw.output_tokens,
            cost=completion_cost(backend.config, raw.input_tokens, raw.output_tokens),
            backend=backend.config.name,
        )

    def estimate_run_cost(self, plan: list[tuple[PromptRequest, BackendConfig | Backend]]) -> float:
        """Worst-case cost of a plan, assuming max_output_tokens are fully
        used. Performs no dispatch."""
        total = 0.0
        for request, target in plan:
            config = target.config if isinstance(target, Backend) else target
            total += completion_cost(config, self.prompt_tokens(request), request.max_output_tokens)
        return total
