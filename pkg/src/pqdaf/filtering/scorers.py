"""Image-text consistency scorers. A scorer maps (image, query) to raw reply text."""

from __future__ import annotations

import base64
import hashlib
import threading
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol

import httpx

from ..errors import ScorerTransportError, ValidationError
from ..samples import ImageBuffer


class Scorer(Protocol):
    def score(self, image: ImageBuffer, query: str) -> str: ...


@dataclass(frozen=True)
class FixedScorer:
    """Always replies with the same text."""

    response: str = "1.0"

    def score(self, image: ImageBuffer, query: str) -> str:
        return self.response


@dataclass(frozen=True)
class HashScorer:
    """Pseudo-uniform score derived from the image bytes and query; pure and reentrant."""

    template: str = "{score:.4f}"
    salt: str = ""

    def value(self, image: ImageBuffer, query: str) -> float:
        h = hashlib.sha256()
        h.update(self.salt.encode())
        h.update(image.to_file().values.tobytes())
        h.update(query.encode())
        return int.from_bytes(h.digest()[:8], "big") / 2.0 ** 64

    def score(self, image: ImageBuffer, query: str) -> str:
        return self.template.format(score=self.value(image, query))


@dataclass
class CallableScorer:
    """Adapts ``fn(image, query) -> str | float``."""

    fn: Callable[[ImageBuffer, str], object]

    def score(self, image: ImageBuffer, query: str) -> str:
        return str(self.fn(image, query))


@dataclass
class RemoteScorer:
    """HTTP client for a hosted vision-language scorer.

    Request: POST JSON ``{"image": <base64 PNG bytes>, "query": <text>}``.
    Reply: free text, or JSON with a ``response`` string field. One attempt per
    call; retries are the caller's business. Safe for concurrent use.
    """

    endpoint: str
    timeout_s: float = 60.0
    client: httpx.Client | None = field(default=None, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if not self.endpoint:
            raise ValidationError("remote scorer needs an endpoint")

    def _client(self) -> httpx.Client:
        with self._lock:
            if self.client is None:
                self.client = httpx.Client(timeout=self.timeout_s)
            return self.client

    def score(self, image: ImageBuffer, query: str) -> str:
        payload = {"image": base64.b64encode(image.png_bytes()).decode("ascii"), "query": query}
        try:
            resp = self._client().post(self.endpoint, json=payload)
        except httpx.HTTPError as exc:
            raise ScorerTransportError(f"scorer request failed: {exc}") from exc
        if resp.status_code >= 400:
            raise ScorerTransportError(f"scorer returned HTTP {resp.status_code}")
        if resp.headers.get("content-type", "").startswith("application/json"):
            body = resp.json()
            if isinstance(body, Mapping) and "response" in body:
                return str(body["response"])
            return str(body)
        return resp.text

    def close(self) -> None:
        if self.client is not None:
            self.client.close()
