"""Single HTTP-fetch seam all providers go through.

Everything network-touching funnels through a transport object with one
``get_json`` method, so tests substitute recorded fixtures and the
``--no-net`` mode substitutes a transport that always fails.
"""

from __future__ import annotations

import logging
import time
from typing import Any, Mapping, Protocol

from ..errors import TransportError

logger = logging.getLogger("wattprint.intensity")

DEFAULT_TIMEOUT = 10.0
DEFAULT_RETRIES = 2


class Transport(Protocol):
    def get_json(self, url: str, params: Mapping[str, str] | None = None) -> Any: ...


class HttpTransport:
    """requests-backed JSON GET with bounded retries."""

    def __init__(
        self,
        timeout: float = DEFAULT_TIMEOUT,
        retries: int = DEFAULT_RETRIES,
        backoff: float = 1.0,
    ):
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff

    def get_json(self, url: str, params: Mapping[str, str] | None = None) -> Any:
        import requests

        last: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                response = requests.get(url, params=params, timeout=self.timeout)
                response.raise_for_status()
                return response.json()
            except Exception as exc:
                last = exc
                logger.debug("GET %s failed (attempt %d): %s", url, attempt + 1, exc)
                if attempt < self.retries and self.backoff > 0:
                    time.sleep(self.backoff * (attempt + 1))
        raise TransportError(f"GET {url} failed after {self.retries + 1} attempts: {last}")


class NullTransport:
    """Transport for --no-net mode: every fetch fails immediately."""

    def get_json(self, url: str, params: Mapping[str, str] | None = None) -> Any:
        raise TransportError("network access is disabled")
