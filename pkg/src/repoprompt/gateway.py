"""Completion backends used by the labeler and evaluator.

The mock backend is a deterministic stand-in for a code completion
model: it returns the registered target string whenever that target
already appears verbatim in the prompt, and a fixed miss sentinel
otherwise. That rule makes every pipeline label independently checkable
with a one-line substring scan while preserving the shape of real
labeling (prompts that surface the right context succeed).

The remote backend speaks a JSON-over-HTTP completions contract with
retry, a concurrency ceiling, a requests-per-minute budget, and an
optional on-disk response cache.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

MISS = "<MISS>"
DEFAULT_MAX_TOKENS = 24
API_KEY_ENV = "REPOPROMPT_API_KEY"


class GatewayError(RuntimeError):
    pass


class TransportError(GatewayError):
    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_tokens: int = DEFAULT_MAX_TOKENS
    temperature: float = 0.0
    stop: tuple[str, ...] = ("\n",)


@dataclass
class BackendConfig:
    kind: str = "mock"
    endpoint: str = ""
    model: str = ""
    max_concurrent: int = 20
    requests_per_minute: int = 400
    max_retries: int = 5
    timeout: float = 30.0
    prompt_token_limit: int | None = None
    cache_dir: str | None = None


def _validate(request: CompletionRequest, config: BackendConfig, tokenizer=None) -> None:
    if request.temperature != 0.0:
        raise ValueError("evaluation requires temperature 0.0")
    if request.max_tokens <= 0:
        raise ValueError("max_tokens must be positive")
    if (
        config.prompt_token_limit is not None
        and tokenizer is not None
        and tokenizer.count(request.prompt) > config.prompt_token_limit
    ):
        raise ValueError(
            f"prompt exceeds the backend limit of {config.prompt_token_limit} tokens"
        )


def _first_line(completion: str) -> str:
    return completion.split("\n", 1)[0]


def mock_complete(oracle_table: dict[str, str], hole_id: str, prompt: str) -> str:
    if hole_id not in oracle_table:
        raise ValueError(f"hole {hole_id!r} is not registered with the mock backend")
    target = oracle_table[hole_id]
    return target if target in prompt else MISS


class MockBackend:
    """Substring-retrieval oracle; pure and fully offline."""

    kind = "mock"

    def __init__(self, oracle_table: dict[str, str], config: BackendConfig | None = None):
        self.oracle_table = dict(oracle_table)
        self.config = config or BackendConfig(kind="mock")

    def complete(self, request: CompletionRequest, hole_id: str | None = None,
                 tokenizer=None) -> str:
        _validate(request, self.config, tokenizer)
        if hole_id is None:
            raise ValueError("the mock backend needs a hole id")
        return _first_line(mock_complete(self.oracle_table, hole_id, request.prompt))


class _RateLimiter:
    """Token bucket; refills continuously at per_minute/60 tokens per second."""

    def __init__(self, per_minute: int, time_fn=time.monotonic, sleep_fn=time.sleep):
        self.capacity = float(per_minute)
        self.tokens = float(per_minute)
        self.rate = per_minute / 60.0
        self.updated = time_fn()
        self.time_fn = time_fn
        self.sleep_fn = sleep_fn
        self.lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self.lock:
                now = self.time_fn()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            self.sleep_fn(wait)


class RemoteBackend:
    """JSON completions client with retry, rate ceiling, and disk cache."""

    kind = "remote"

    RETRYABLE_STATUSES = (429, 500, 502, 503, 504)

    def __init__(
        self,
        config: BackendConfig,
        session: requests.Session | None = None,
        time_fn=time.monotonic,
        sleep_fn=time.sleep,
    ):
        if config.requests_per_minute <= 0:
            raise ValueError("remote backends need a positive rate ceiling")
        if not config.endpoint:
            raise ValueError("remote backends need an endpoint")
        self.config = config
        self.session = session or requests.Session()
        self.sleep_fn = sleep_fn
        self.semaphore = threading.BoundedSemaphore(config.max_concurrent)
        self.limiter = _RateLimiter(config.requests_per_minute, time_fn, sleep_fn)
        self.cache_dir = Path(config.cache_dir) if config.cache_dir else None
        if self.cache_dir:
            self.cache_dir.mkdir(parents=True, exist_ok=True)

    def _payload(self, request: CompletionRequest) -> dict:
        return {
            "model": self.config.model,
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
            "stop": list(request.stop),
        }

    def _cache_path(self, payload: dict) -> Path | None:
        if not self.cache_dir:
            return None
        key = hashlib.sha256(
            json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
        ).hexdigest()
        return self.cache_dir / f"{key}.json"

    def complete(self, request: CompletionRequest, hole_id: str | None = None,
                 tokenizer=None) -> str:
        _validate(request, self.config, tokenizer)
        payload = self._payload(request)
        cache_path = self._cache_path(payload)
        if cache_path and cache_path.exists():
            return json.loads(cache_path.read_text(encoding="utf-8"))["completion"]
        completion = _first_line(self._post(payload))
        if cache_path:
            cache_path.write_text(
                json.dumps({"completion": completion}, sort_keys=True),
                encoding="utf-8",
            )
        return completion

    def _post(self, payload: dict) -> str:
        headers = {}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        last_status: int | None = None
        last_error = "no attempts made"
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self.sleep_fn(min(0.5 * 2 ** (attempt - 1), 8.0))
            self.limiter.acquire()
            try:
                with self.semaphore:
                    response = self.session.post(
                        self.config.endpoint,
                        json=payload,
                        headers=headers,
                        timeout=self.config.timeout,
                    )
            except requests.RequestException as exc:
                last_error = str(exc)
                continue
            if response.status_code in self.RETRYABLE_STATUSES:
                last_status = response.status_code
                last_error = f"status {response.status_code}"
                continue
            if response.status_code != 200:
                raise TransportError(
                    f"completion endpoint returned {response.status_code}",
                    response.status_code,
                )
            body = response.json()
            try:
                return body["choices"][0]["text"]
            except (KeyError, IndexError, TypeError) as exc:
                raise TransportError(f"malformed completion response: {exc!r}") from exc
        raise TransportError(
            f"retries exhausted: {last_error}", last_status
        )


def make_backend(config: BackendConfig, oracle_table: dict[str, str] | None = None):
    if config.kind == "mock":
        return MockBackend(oracle_table or {}, config)
    if config.kind == "remote":
        return RemoteBackend(config)
    raise ValueError(f"unknown backend kind {config.kind!r}")
