"""PNG payload handling and the request-digest canon.

The digest is sha256 over ``"WxHxC"`` plus the row-major 8-bit samples of
the decoded PNG; caption requests hash the image digest plus the prompt.
Clients computing digests over their in-memory images arrive at the same
values after a PNG round trip, which is what keys mock fixtures.
"""

from __future__ import annotations

import base64
import hashlib
import io

import numpy as np
from PIL import Image as PilImage


class ImagePayloadError(ValueError):
    pass


def decode_png_base64(text: str) -> np.ndarray:
    """Decode a base64 PNG to a (H, W, C) uint8 array, C in {1, 3}."""
    try:
        raw = base64.b64decode(text, validate=True)
        pil = PilImage.open(io.BytesIO(raw))
        pil.load()
    except Exception as exc:
        raise ImagePayloadError(f"cannot decode PNG payload: {exc}") from exc
    if pil.mode not in ("L", "RGB"):
        pil = pil.convert("RGB" if pil.mode not in ("1", "I;16", "I", "F") else "L")
    arr = np.asarray(pil, dtype=np.uint8)
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    return arr


def digest_of_array(arr: np.ndarray) -> str:
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    h = hashlib.sha256()
    h.update(f"{arr.shape[1]}x{arr.shape[0]}x{arr.shape[2]}".encode("ascii"))
    h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def digest_of_png_base64(text: str) -> str:
    return digest_of_array(decode_png_base64(text))


def caption_key(image_digest: str, prompt: str) -> str:
    h = hashlib.sha256()
    h.update(image_digest.encode("ascii"))
    h.update(b"\n")
    h.update(prompt.encode("utf-8"))
    return h.hexdigest()


def mask_to_base64_png(mask: np.ndarray) -> str:
    pil = PilImage.fromarray(np.asarray(mask, dtype=bool).astype(np.uint8) * 255,
                             mode="L").convert("1")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def mask_from_base64_png(text: str) -> np.ndarray:
    arr = decode_png_base64(text)
    return arr[:, :, 0] > 0


def array_to_base64_png(arr: np.ndarray) -> str:
    if arr.ndim == 3 and arr.shape[2] == 1:
        pil = PilImage.fromarray(arr[:, :, 0], mode="L")
    else:
        pil = PilImage.fromarray(arr, mode="RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")
