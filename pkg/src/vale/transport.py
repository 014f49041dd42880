"""HTTP transport with bounded retry, shared by every remote client.

A transport exposes ``post_json(url, payload) -> dict``. The HTTP
implementation retries failed attempts (connection errors, timeouts,
non-200 statuses) with exponential backoff, raising
:class:`~vale.errors.TransportError` carrying one timestamp per attempt.
A 200 response whose body is not a JSON object is a
:class:`~vale.errors.ProtocolError`. An in-flight semaphore caps concurrent
requests so a shared transport can be used from many threads.
"""

from __future__ import annotations

import json
import threading
import time
from typing import Protocol

import requests

from .errors import ProtocolError, TransportError

DEFAULT_ATTEMPTS = 3
DEFAULT_TIMEOUT = 30.0
DEFAULT_BACKOFF = 0.25


class Transport(Protocol):
    def post_json(self, url: str, payload: dict) -> dict: ...


class HttpTransport:
    """POSTs JSON over HTTP with retries and a concurrent-request cap."""

    def __init__(self, timeout: float = DEFAULT_TIMEOUT, attempts: int = DEFAULT_ATTEMPTS,
                 backoff: float = DEFAULT_BACKOFF, max_in_flight: int = 8):
        if attempts < 1:
            raise ValueError("attempts must be >= 1")
        self.timeout = timeout
        self.attempts = attempts
        self.backoff = backoff
        self._slots = threading.Semaphore(max_in_flight)

    def post_json(self, url: str, payload: dict) -> dict:
        attempt_times: list[float] = []
        last_error = "unknown"
        last_status = None
        for attempt in range(self.attempts):
            attempt_times.append(time.time())
            try:
                with self._slots:
                    response = requests.post(url, json=payload, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = f"{type(exc).__name__}: {exc}"
            else:
                if response.status_code == 200:
                    return _decode_json_object(response, url)
                last_status = response.status_code
                last_error = f"HTTP {response.status_code}"
            if attempt + 1 < self.attempts:
                time.sleep(self.backoff * (2 ** attempt))
        raise TransportError(
            f"POST {url} failed after {len(attempt_times)} attempts: {last_error}",
            attempts=attempt_times, status=last_status)


def _decode_json_object(response: requests.Response, url: str) -> dict:
    try:
        body = response.json()
    except (json.JSONDecodeError, ValueError) as exc:
        raise ProtocolError(f"non-JSON response from {url}: {exc}") from exc
    if not isinstance(body, dict):
        raise ProtocolError(f"response from {url} is not a JSON object")
    return body
