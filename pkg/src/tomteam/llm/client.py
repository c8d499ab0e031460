"""Minimal chat-completion client with bounded retries."""

from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import httpx

logger = logging.getLogger(__name__)


class ChatError(RuntimeError):
    pass


class ChatAuthError(ChatError):
    pass


class ChatTimeoutError(ChatError):
    pass


class ChatRateLimitError(ChatError):
    pass


class ChatServerError(ChatError):
    pass


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.0

    def __post_init__(self):
        if not self.messages:
            raise ValueError("a chat request needs at least one message")
        object.__setattr__(self, "messages", tuple((str(r), str(c)) for r, c in self.messages))

    def body(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "messages": [{"role": r, "content": c} for r, c in self.messages],
            "temperature": self.temperature,
        }


@dataclass(frozen=True)
class ChatResponse:
    content: str
    usage: Mapping[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    api_key: str | None = None
    model: str = "default"
    timeout: float = 30.0
    max_retries: int = 3
    backoff: float = 0.5
    max_requests_per_second: float | None = None

    @classmethod
    def from_env(
        cls,
        url_var: str = "TOMTEAM_LLM_URL",
        key_var: str = "TOMTEAM_LLM_KEY",
        model_var: str = "TOMTEAM_LLM_MODEL",
        env: Mapping[str, str] | None = None,
        **overrides: Any,
    ) -> EndpointConfig:
        env = os.environ if env is None else env
        url = env.get(url_var)
        if not url:
            raise ChatError(f"environment variable {url_var} (endpoint URL) is not set")
        return cls(url, env.get(key_var), env.get(model_var, "default"), **overrides)


class _RateLimiter:
    def __init__(self, per_second: float | None):
        self.interval = 1.0 / per_second if per_second else 0.0
        self.lock = threading.Lock()
        self.next_at = 0.0

    def wait(self, sleep: Callable[[float], None]) -> None:
        if not self.interval:
            return
        with self.lock:
            now = time.monotonic()
            delay = self.next_at - now
            self.next_at = max(now, self.next_at) + self.interval
        if delay > 0:
            sleep(delay)


_limiters: dict[str, _RateLimiter] = {}


def _limiter(config: EndpointConfig) -> _RateLimiter:
    key = f"{config.base_url}|{config.max_requests_per_second}"
    if key not in _limiters:
        _limiters[key] = _RateLimiter(config.max_requests_per_second)
    return _limiters[key]


def _classify(resp: httpx.Response) -> ChatError | None:
    if resp.status_code in (401, 403):
        return ChatAuthError(f"authentication failed ({resp.status_code})")
    if resp.status_code == 429:
        return ChatRateLimitError("rate limited (429)")
    if resp.status_code >= 500:
        return ChatServerError(f"server error ({resp.status_code})")
    if resp.status_code >= 400:
        return ChatError(f"request rejected ({resp.status_code}): {resp.text[:200]}")
    return None


def chat_call(
    request: ChatRequest,
    config: EndpointConfig,
    client: httpx.Client | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> ChatResponse:
    """POST one chat completion. Timeouts, 429 and 5xx are retried with exponential backoff.

    Authentication failures are raised immediately.
    """
    url = config.base_url.rstrip("/") + "/chat/completions"
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    owned = client is None
    http = client or httpx.Client(timeout=config.timeout)
    last: ChatError | None = None
    try:
        for attempt in range(config.max_retries + 1):
            if attempt:
                delay = config.backoff * 2 ** (attempt - 1)
                logger.warning("attempt %d failed (%s); retrying in %.2fs", attempt, last, delay)
                sleep(delay)
            _limiter(config).wait(sleep)
            try:
                resp = http.post(url, json=request.body(), headers=headers, timeout=config.timeout)
            except httpx.TimeoutException as exc:
                last = ChatTimeoutError(f"no response within {config.timeout}s")
                last.__cause__ = exc
                continue
            except httpx.TransportError as exc:
                last = ChatServerError(f"transport error: {exc}")
                continue
            err = _classify(resp)
            if err is None:
                return _decode(resp)
            if isinstance(err, (ChatRateLimitError, ChatServerError)):
                last = err
                continue
            raise err
    finally:
        if owned:
            http.close()
    assert last is not None
    raise last


def _decode(resp: httpx.Response) -> ChatResponse:
    try:
        data = resp.json()
        content = data["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise ChatError(f"malformed chat-completion response: {resp.text[:200]}") from exc
    if not content:
        raise ChatError("chat-completion response has empty content")
    usage = {k: int(v) for k, v in (data.get("usage") or {}).items() if isinstance(v, int)}
    return ChatResponse(content, usage)
