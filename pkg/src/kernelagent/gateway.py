"""Uniform chat-completion interface: real providers and a scripted double.

The scripted backend returns a fixed response sequence regardless of request
content, which makes whole sessions deterministic and offline-testable. Token
usage comes from the provider when available; otherwise the local estimator
(ceil of character count / 4) is applied identically to both sides, so
scripted-run numbers are meaningful only for relative accounting.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Protocol, Sequence

from .errors import RequestFailedError, ScriptExhaustedError

if TYPE_CHECKING:
    from .semantic import ChatMessage

logger = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.2
RETRY_ATTEMPTS = 3
RETRY_BASE_DELAY = 1.0


def estimate_tokens(text: str) -> int:
    """Local token estimator: ceil(len(text) / 4)."""
    return -(-len(text) // 4)


@dataclass
class Usage:
    prompt_tokens: int
    completion_tokens: int

    @property
    def total(self) -> int:
        return self.prompt_tokens + self.completion_tokens


@dataclass
class ModelRequest:
    messages: "Sequence[ChatMessage]"
    temperature: float = DEFAULT_TEMPERATURE
    max_output_tokens: int = 4096
    model_id: str = "scripted"

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not self.messages:
            raise ValueError("request must carry at least one message")


@dataclass
class ModelResponse:
    text: str
    usage: Usage
    finish_reason: str = "stop"
    attempts: int = 1


@dataclass
class UsageCounter:
    """Cumulative per-session counters; all fields are monotone."""

    prompt_tokens: int = 0
    completion_tokens: int = 0
    steps: int = 0

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


def accumulate(counter: UsageCounter, usage: Usage) -> UsageCounter:
    """Fold one response's usage into the session counter."""
    if usage.prompt_tokens < 0 or usage.completion_tokens < 0:
        raise ValueError("usage components must be non-negative")
    counter.prompt_tokens += usage.prompt_tokens
    counter.completion_tokens += usage.completion_tokens
    counter.steps += 1
    return counter


class ModelBackend(Protocol):
    def complete(self, request: ModelRequest) -> ModelResponse: ...


class TransientRequestError(Exception):
    """Internal signal: the request may succeed on retry (transport, 429, 5xx)."""


def _estimated_usage(request: ModelRequest, text: str) -> Usage:
    prompt_chars = sum(len(m.content) for m in request.messages)
    return Usage(
        prompt_tokens=estimate_tokens("x" * prompt_chars) if prompt_chars else 0,
        completion_tokens=estimate_tokens(text),
    )


class ScriptedBackend:
    """Deterministic double: yields scripted texts in order, ignoring content."""

    def __init__(self, script: Sequence[str]):
        if not script:
            raise ValueError("script must be non-empty")
        self._script = list(script)
        self._cursor = 0
        self._lock = threading.Lock()

    @property
    def remaining(self) -> int:
        with self._lock:
            return len(self._script) - self._cursor

    def complete(self, request: ModelRequest) -> ModelResponse:
        with self._lock:
            if self._cursor >= len(self._script):
                raise ScriptExhaustedError(
                    f"scripted backend exhausted after {len(self._script)} responses"
                )
            text = self._script[self._cursor]
            self._cursor += 1
        return ModelResponse(text=text, usage=_estimated_usage(request, text))


def scripted_model(script: Sequence[str]) -> ScriptedBackend:
    return ScriptedBackend(script)


class HttpChatBackend:
    """Adapter for providers speaking the common chat-completions wire shape.

    Credentials come from the environment only. A custom ``transport`` can be
    injected for testing (any httpx-compatible transport).
    """

    def __init__(
        self,
        base_url: str,
        model_id: str = "",
        api_key_env: str = "LLM_API_KEY",
        timeout: float = 120.0,
        transport=None,
    ):
        import httpx

        self.base_url = base_url.rstrip("/")
        self.model_id = model_id
        self._api_key = os.environ.get(api_key_env, "")
        self._client = httpx.Client(timeout=timeout, transport=transport)
        self._httpx = httpx

    def complete(self, request: ModelRequest) -> ModelResponse:
        payload = {
            "model": request.model_id or self.model_id,
            "messages": [
                {"role": m.role, "content": m.content} for m in request.messages
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        try:
            response = self._client.post(
                f"{self.base_url}/chat/completions", json=payload, headers=headers
            )
        except self._httpx.HTTPError as exc:
            raise TransientRequestError(f"transport failure: {exc}") from exc

        if response.status_code == 429 or response.status_code >= 500:
            raise TransientRequestError(f"provider returned {response.status_code}")
        if response.status_code != 200:
            raise RequestFailedError(
                f"provider returned {response.status_code}: {response.text[:200]}"
            )

        body = response.json()
        choice = body["choices"][0]
        text = choice["message"]["content"] or ""
        usage = body.get("usage")
        if usage:
            parsed = Usage(
                prompt_tokens=int(usage.get("prompt_tokens", 0)),
                completion_tokens=int(usage.get("completion_tokens", 0)),
            )
        else:
            parsed = _estimated_usage(request, text)
        return ModelResponse(
            text=text, usage=parsed, finish_reason=choice.get("finish_reason", "stop")
        )


def complete(
    backend: ModelBackend,
    request: ModelRequest,
    max_attempts: int = RETRY_ATTEMPTS,
    retry_base_delay: float = RETRY_BASE_DELAY,
    sleep: Callable[[float], None] = time.sleep,
) -> ModelResponse:
    """Call the backend, retrying transient failures with exponential backoff."""
    for attempt in range(1, max_attempts + 1):
        try:
            response = backend.complete(request)
        except TransientRequestError as exc:
            if attempt == max_attempts:
                raise RequestFailedError(
                    f"request failed after {max_attempts} attempts: {exc}"
                ) from exc
            delay = retry_base_delay * (2 ** (attempt - 1))
            logger.warning("attempt %d failed (%s); retrying in %.1fs", attempt, exc, delay)
            sleep(delay)
        else:
            response.attempts = attempt
            return response
    raise RequestFailedError("unreachable")  # pragma: no cover
