"""Fixture storage for mock mode plus a builder for new fixture sets.

A fixture directory holds one ``fixtures.json``: a list of entries
``{"endpoint": "/predict", "digest": "...", "response": {...}}``. Keys are
(endpoint, digest) and must be unique; responses are validated against the
wire contracts at load time so a broken fixture fails fast rather than
polluting clients.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .imaging import (caption_key, decode_png_base64, digest_of_array,
                      mask_to_base64_png)

ENDPOINTS = ("/predict", "/segment", "/caption")


class FixtureError(ValueError):
    pass


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise FixtureError(message)


def validate_response(endpoint: str, response: dict) -> None:
    _require(isinstance(response, dict), f"{endpoint}: response must be an object")
    if endpoint == "/predict":
        labels = response.get("labels")
        probs = response.get("probabilities")
        _require(isinstance(labels, list) and labels, "/predict: labels required")
        _require(all(isinstance(l, str) for l in labels), "/predict: string labels")
        _require(len(set(labels)) == len(labels), "/predict: unique labels")
        _require(isinstance(probs, list) and len(probs) == len(labels),
                 "/predict: probabilities must match labels")
        _require(all(isinstance(p, (int, float)) and not isinstance(p, bool)
                     and math.isfinite(p) and 0 <= p <= 1 for p in probs),
                 "/predict: probabilities in [0, 1]")
        _require(abs(sum(probs) - 1.0) <= 1e-3, "/predict: probabilities sum to 1")
    elif endpoint == "/segment":
        masks = response.get("masks")
        _require(isinstance(masks, list) and masks, "/segment: masks required")
        for entry in masks:
            _require(isinstance(entry, dict) and "png" in entry
                     and "confidence" in entry,
                     "/segment: each mask needs png and confidence")
            _require(isinstance(entry["png"], str),
                     "/segment: png must be base64 text")
            conf = entry["confidence"]
            _require(isinstance(conf, (int, float)) and not isinstance(conf, bool)
                     and math.isfinite(conf), "/segment: finite confidence")
    elif endpoint == "/caption":
        _require(isinstance(response.get("text"), str) and response["text"],
                 "/caption: non-empty text")
        _require(isinstance(response.get("model"), str) and response["model"],
                 "/caption: model name required")
    else:
        raise FixtureError(f"unknown endpoint {endpoint!r}")


class FixtureStore:
    def __init__(self, entries: dict[tuple[str, str], dict]):
        self.entries = entries

    @classmethod
    def load(cls, fixture_dir) -> "FixtureStore":
        path = Path(fixture_dir) / "fixtures.json"
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise FixtureError(f"cannot read {path}: {exc}") from exc
        _require(isinstance(raw, list), "fixtures.json must hold a list")
        entries = {}
        for item in raw:
            _require(isinstance(item, dict)
                     and {"endpoint", "digest", "response"} <= set(item),
                     "fixture entries need endpoint, digest, response")
            key = (item["endpoint"], item["digest"])
            _require(key not in entries, f"duplicate fixture key {key}")
            validate_response(item["endpoint"], item["response"])
            entries[key] = item["response"]
        return cls(entries)

    def lookup(self, endpoint: str, digest: str) -> dict | None:
        return self.entries.get((endpoint, digest))


DEFAULT_LABELS = ("bald_eagle", "kite", "vulture")
DEFAULT_CONFIDENCES = (0.811, 0.932, 0.874)
DEFAULT_PROMPT_TEMPLATE = "Explain the object in the image: '{label}'?"
DEFAULT_CAPTION = ("The segmented object is a bald eagle isolated on an "
                   "empty background, with a pale head and tail and dark "
                   "outstretched wings.")


def _nested_masks(gray: np.ndarray) -> list[np.ndarray]:
    """Three nested masks around the brightest structure in the image."""
    threshold = np.percentile(gray, 75)
    exact = gray > threshold
    if not exact.any():
        exact = gray >= gray.max()
    eroded = exact.copy()
    eroded[:-1] &= exact[1:]
    eroded[1:] &= exact[:-1]
    eroded[:, :-1] &= exact[:, 1:]
    eroded[:, 1:] &= exact[:, :-1]
    dilated = exact.copy()
    dilated[:-1] |= exact[1:]
    dilated[1:] |= exact[:-1]
    dilated[:, :-1] |= exact[:, 1:]
    dilated[:, 1:] |= exact[:, :-1]
    return [eroded, exact, dilated]


def build_fixture_set(image_png_path, label: str = DEFAULT_LABELS[0],
                      labels: tuple[str, ...] = DEFAULT_LABELS,
                      probability: float = 1.0,
                      confidences: tuple[float, ...] = DEFAULT_CONFIDENCES,
                      caption: str = DEFAULT_CAPTION) -> list[dict]:
    """Canned fixture entries for one image: prediction, three masks, and a
    caption keyed by the best-mask segmented image plus the default prompt."""
    arr = decode_png_base64(_read_png_base64(image_png_path))
    image_digest = digest_of_array(arr)

    rest = (1.0 - probability) / max(1, len(labels) - 1)
    probabilities = [probability] + [rest] * (len(labels) - 1)
    entries = [{"endpoint": "/predict", "digest": image_digest,
                "response": {"labels": list(labels),
                             "probabilities": probabilities}}]

    gray = arr.astype(np.float64).mean(axis=2)
    masks = _nested_masks(gray)
    entries.append({"endpoint": "/segment", "digest": image_digest,
                    "response": {"masks": [
                        {"png": mask_to_base64_png(mask), "confidence": conf}
                        for mask, conf in zip(masks, confidences)]}})

    best = masks[int(np.argmax(confidences))]
    segmented = arr * best[:, :, np.newaxis].astype(np.uint8)
    prompt = DEFAULT_PROMPT_TEMPLATE.format(label=label)
    entries.append({"endpoint": "/caption",
                    "digest": caption_key(digest_of_array(segmented), prompt),
                    "response": {"text": caption, "model": "fixture-captioner"}})
    return entries


def _read_png_base64(path) -> str:
    import base64

    return base64.b64encode(Path(path).read_bytes()).decode("ascii")


def write_fixture_dir(entries: list[dict], out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "fixtures.json"
    path.write_text(json.dumps(entries, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path
