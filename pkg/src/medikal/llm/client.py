"""Chat transports: a fixture-backed mock and a generic JSON-over-HTTP client."""

from __future__ import annotations

import json
import logging
import os
import threading
import urllib.error
from typing import Mapping, Protocol

from ..errors import LlmTransportError, MockResponseMissing
from ..retrieval import post_json

log = logging.getLogger(__name__)


class ChatClient(Protocol):
    def complete(self, system: str, user: str, *, key: str = "") -> str:
        """Return the model's reply. ``key`` names the call site (``"<stage>:<record>[:<disease>]"``)."""
        ...


class MockChatClient:
    """Answers from a scenario-key -> response map; an unknown key is an error."""

    def __init__(self, responses: Mapping[str, str]):
        self.responses = dict(responses)
        self.calls: list[str] = []
        self._lock = threading.Lock()

    @classmethod
    def load(cls, path: str | os.PathLike) -> "MockChatClient":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict) or not all(isinstance(v, str) for v in data.values()):
            raise ValueError(f"{path}: mock responses must be a JSON object of strings")
        return cls(data)

    def complete(self, system: str, user: str, *, key: str = "") -> str:
        with self._lock:
            self.calls.append(key)
        try:
            return self.responses[key]
        except KeyError:
            raise MockResponseMissing(f"no mock response for {key!r}") from None


class HttpChatClient:
    """POST ``{"system", "user"}`` and read ``{"text"}``; one retry on transport failure."""

    def __init__(self, url: str, timeout: float = 60.0, retries: int = 1):
        self.url = url
        self.timeout = timeout
        self.retries = retries

    def complete(self, system: str, user: str, *, key: str = "") -> str:
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                reply = post_json(self.url, {"system": system, "user": user}, self.timeout)
            except (urllib.error.URLError, OSError) as exc:
                last = exc
                log.warning("chat call %s failed (attempt %d): %s", key, attempt + 1, exc)
                continue
            except ValueError as exc:
                raise LlmTransportError(f"chat endpoint returned invalid JSON: {exc}") from exc
            text = reply.get("text") if isinstance(reply, dict) else None
            if not isinstance(text, str):
                raise LlmTransportError("chat endpoint reply has no string 'text' field")
            return text
        raise LlmTransportError(f"chat endpoint {self.url} unreachable: {last}")
