"""Chat-completion transport with retry and latency accounting."""
from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass
from typing import Callable, Optional, Protocol

import httpx

from ..config import LlmConfig

log = logging.getLogger(__name__)


class LlmError(RuntimeError):
    """The endpoint could not produce a reply within the retry budget."""


class ChatBackend(Protocol):
    def complete(self, messages: list[dict], *, model: str, temperature: float, timeout: float,
                 step: Optional[int] = None, agent: Optional[str] = None) -> str: ...


class HttpChatBackend:
    """POSTs OpenAI-style ``{model, temperature, messages}`` bodies to ``endpoint``."""

    def __init__(self, endpoint: str, api_key: Optional[str] = None, client: Optional[httpx.Client] = None):
        self.endpoint = endpoint
        self.api_key = api_key
        self.client = client or httpx.Client()

    def complete(self, messages, *, model, temperature, timeout, step=None, agent=None) -> str:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        body = {"model": model, "temperature": temperature, "messages": messages}
        resp = self.client.post(self.endpoint, json=body, headers=headers, timeout=timeout)
        resp.raise_for_status()
        data = resp.json()
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as err:
            raise ValueError(f"unexpected completion payload: {data!r:.200}") from err


def backend_from_config(config: LlmConfig, client: Optional[httpx.Client] = None) -> HttpChatBackend:
    return HttpChatBackend(config.endpoint, os.environ.get(config.api_key_env), client)


@dataclass
class QueryResult:
    text: str
    latency: float
    attempts: int


TRANSPORT_ERRORS = (httpx.HTTPError, TimeoutError, ConnectionError, OSError, ValueError)


def query(config: LlmConfig, messages: list[dict], backend: ChatBackend, *, step: Optional[int] = None,
          agent: Optional[str] = None, sleep: Callable[[float], None] = time.sleep) -> QueryResult:
    """One round trip, retried with exponential backoff on transport failure."""
    started = time.perf_counter()
    last: Optional[Exception] = None
    for attempt in range(config.max_retries + 1):
        if attempt:
            sleep(config.backoff * 2 ** (attempt - 1))
        try:
            text = backend.complete(messages, model=config.model, temperature=config.temperature,
                                    timeout=config.timeout, step=step, agent=agent)
            return QueryResult(text, time.perf_counter() - started, attempt + 1)
        except TRANSPORT_ERRORS as err:
            last = err
            log.warning("chat request failed (attempt %d/%d): %s", attempt + 1, config.max_retries + 1, err)
    raise LlmError(f"no reply after {config.max_retries + 1} attempts: {last}") from last
