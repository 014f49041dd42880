"""Client for the /caption endpoint of a vision-language service.

The service owns generation; this client owns the request/response contract
and the defaults (temperature 0.2, 1024 max tokens, no top-p field). The
image digest gives mock services and fixtures a stable request key.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .errors import InputError, ProtocolError
from .image import Image, digest, to_base64_png
from .transport import Transport

DEFAULT_TEMPERATURE = 0.2
DEFAULT_MAX_TOKENS = 1024

__all__ = ["CaptionRequest", "CaptionResponse", "CaptionClient", "digest",
           "validate_caption_payload"]


@dataclass(frozen=True, eq=False)
class CaptionRequest:
    image: Image
    prompt: str
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self):
        if self.temperature < 0:
            raise InputError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise InputError("maxTokens must be >= 1")
        if not self.prompt:
            raise InputError("prompt must be non-empty")

    def to_payload(self) -> dict:
        # Top-p is deliberately absent: unspecified means the field is omitted.
        return {
            "image": to_base64_png(self.image),
            "prompt": self.prompt,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }


@dataclass(frozen=True)
class CaptionResponse:
    text: str
    model: str
    latency_ms: float = 0.0


def validate_caption_payload(body: dict) -> tuple[str, str]:
    """Check a /caption response against the wire contract."""
    text = body.get("text")
    model = body.get("model")
    if not isinstance(text, str):
        raise ProtocolError("caption response: 'text' must be a string")
    if not text:
        raise ProtocolError("caption response: empty caption text")
    if not isinstance(model, str) or not model:
        raise ProtocolError("caption response: 'model' must be a non-empty string")
    return text, model


class CaptionClient:
    """POSTs caption requests and validates responses."""

    def __init__(self, endpoint: str, transport: Transport):
        self.endpoint = endpoint.rstrip("/")
        self.transport = transport

    def caption(self, req: CaptionRequest) -> CaptionResponse:
        started = time.monotonic()
        body = self.transport.post_json(self.endpoint + "/caption", req.to_payload())
        text, model = validate_caption_payload(body)
        return CaptionResponse(text, model,
                               latency_ms=(time.monotonic() - started) * 1000.0)
