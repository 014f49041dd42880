"""Deterministic in-process stand-ins for the three remote services.

``MockServices`` answers /predict, /segment, and /caption purely as a
function of the request (exact fixture responses for known request digests,
deterministic fallbacks otherwise), and ``MockTransport`` presents it behind
the same interface as the HTTP transport, so every client exercises its real
encode/validate path without a network.
"""

from __future__ import annotations

import copy
import hashlib
from urllib.parse import urlparse

import numpy as np

from . import fixtures
from .errors import TransportError
from .image import (Image, digest, digest_of_png_base64, from_base64_png,
                    mask_to_base64_png)
from .segment import PointPrompt, segment_builtin

MOCK_BASE_URL = "http://mock.local"


def caption_key(image_digest: str, prompt: str) -> str:
    h = hashlib.sha256()
    h.update(image_digest.encode("ascii"))
    h.update(b"\n")
    h.update(prompt.encode("utf-8"))
    return h.hexdigest()


class MockServices:
    """Pure request -> response maps with optional computed fallbacks."""

    def __init__(self):
        self.fixtures: dict[tuple[str, str], dict] = {}
        self.fallbacks: dict[str, object] = {}

    def add_fixture(self, endpoint: str, key: str, response: dict) -> None:
        self.fixtures[(endpoint, key)] = response

    def set_fallback(self, endpoint: str, handler) -> None:
        self.fallbacks[endpoint] = handler

    def request_key(self, endpoint: str, payload: dict) -> str:
        if endpoint in ("/predict", "/segment"):
            return digest_of_png_base64(payload["image"])
        if endpoint == "/caption":
            return caption_key(digest_of_png_base64(payload["image"]),
                               payload["prompt"])
        raise TransportError(f"mock service has no endpoint {endpoint}")

    def handle(self, endpoint: str, payload: dict) -> dict:
        key = self.request_key(endpoint, payload)
        hit = self.fixtures.get((endpoint, key))
        if hit is not None:
            return copy.deepcopy(hit)
        fallback = self.fallbacks.get(endpoint)
        if fallback is None:
            raise TransportError(
                f"mock service: no fixture for {endpoint} digest {key}",
                status=404)
        return fallback(payload)


class MockTransport:
    """Routes post_json calls to an in-process MockServices instance."""

    def __init__(self, services: MockServices):
        self.services = services

    def post_json(self, url: str, payload: dict) -> dict:
        path = urlparse(url).path or url
        return self.services.handle(path, payload)


def _normalized_probabilities(p: float, n_rest: int) -> list[float]:
    rest = (1.0 - p) / n_rest
    probs = [p] + [rest] * n_rest
    total = sum(probs)
    return [v / total for v in probs]


def bald_eagle_services() -> MockServices:
    """The bundled mock service set for the bald-eagle sample.

    The original image predicts its class at probability 1.0 and segments
    into three masks whose best confidence is 0.932. Other images (masked
    coalitions, for instance) get content-dependent fallbacks: the predicted
    probability tracks brightness inside the bird's bounding box, masks come
    from region growing, and captions are a pure function of digest + prompt.
    """
    services = MockServices()
    image = fixtures.bald_eagle_image()
    image_digest = digest(image)
    labels = list(fixtures.BALD_EAGLE_LABELS)

    services.add_fixture("/predict", image_digest, {
        "labels": labels,
        "probabilities": [1.0] + [0.0] * (len(labels) - 1),
    })

    window = fixtures.bald_eagle_window(image)
    r0, c0, r1, c1 = window
    reference_mean = float(image.grayscale()[r0:r1, c0:c1].mean())

    def predict_fallback(payload: dict) -> dict:
        req = from_base64_png(payload["image"])
        if (req.height, req.width) != (image.height, image.width):
            mean = float(req.grayscale().mean())
        else:
            mean = float(req.grayscale()[r0:r1, c0:c1].mean())
        p = float(np.clip(mean / reference_mean, 0.0, 1.0))
        return {"labels": labels,
                "probabilities": _normalized_probabilities(p, len(labels) - 1)}

    services.set_fallback("/predict", predict_fallback)

    masks = fixtures.bald_eagle_masks(image)
    services.add_fixture("/segment", image_digest, {
        "masks": [
            {"png": mask_to_base64_png(mask), "confidence": conf}
            for mask, conf in zip(masks, fixtures.BALD_EAGLE_MASK_CONFIDENCES)
        ],
    })

    def segment_fallback(payload: dict) -> dict:
        req = from_base64_png(payload["image"])
        prompt = PointPrompt(tuple((int(r), int(c)) for r, c in payload["points"]),
                             tuple(int(v) for v in payload["labels"]))
        candidates = segment_builtin(req, prompt, tolerance=0.15)
        return {"masks": [{"png": mask_to_base64_png(c.mask),
                           "confidence": c.confidence} for c in candidates]}

    services.set_fallback("/segment", segment_fallback)

    exact_mask = masks[1]
    segmented = Image(image.data * exact_mask[:, :, np.newaxis])
    rendered_prompt = "Explain the object in the image: 'bald_eagle'?"
    services.add_fixture(
        "/caption", caption_key(digest(segmented), rendered_prompt),
        {"text": fixtures.BALD_EAGLE_CAPTION, "model": "mock-captioner"})

    def caption_fallback(payload: dict) -> dict:
        key = services.request_key("/caption", payload)
        return {"text": f"Deterministic mock caption {key[:12]} for prompt: "
                        f"{payload['prompt']}",
                "model": "mock-captioner"}

    services.set_fallback("/caption", caption_fallback)
    return services


MOCK_BUNDLES = {
    "bald-eagle": bald_eagle_services,
}


def build_bundle(name: str) -> MockServices:
    try:
        factory = MOCK_BUNDLES[name]
    except KeyError:
        raise TransportError(f"unknown mock fixture bundle {name!r}") from None
    return factory()
