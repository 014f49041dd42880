"""Image container and serialization helpers.

Images are stored as float64 arrays of shape (height, width, channels) with
intensities in [0, 1]. PNG is the only on-disk and on-wire format; the
canonical byte representation (used for digests and fixtures) is the 8-bit
quantization ``round(value * 255)``, which survives a PNG round trip exactly.
"""

from __future__ import annotations

import base64
import hashlib
import io
from dataclasses import dataclass

import numpy as np
from PIL import Image as PilImage

from .errors import InputError


@dataclass(frozen=True, eq=False)
class Image:
    """An image with intensities in [0, 1], row-major, 1 or 3 channels."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise InputError(f"image must be (H, W, 1|3), got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InputError(f"degenerate image dimensions {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InputError("image contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise InputError("image intensities must lie in [0, 1]")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def to_uint8(self) -> np.ndarray:
        return np.round(self.data * 255.0).astype(np.uint8)

    def grayscale(self) -> np.ndarray:
        """Channel mean as a 2-D float array."""
        return self.data.mean(axis=2)

    def to_gray_image(self) -> "Image":
        """Grayscale copy replicated across the original channel count."""
        g = self.grayscale()
        return Image(np.repeat(g[:, :, np.newaxis], self.channels, axis=2))

    def resize_bilinear(self, height: int, width: int) -> "Image":
        if height < 1 or width < 1:
            raise InputError("resize target must be positive")
        if (height, width) == (self.height, self.width):
            return self
        planes = []
        for c in range(self.channels):
            plane = PilImage.fromarray(self.data[:, :, c].astype(np.float32), mode="F")
            plane = plane.resize((width, height), PilImage.BILINEAR)
            planes.append(np.asarray(plane, dtype=np.float64))
        out = np.stack(planes, axis=2)
        return Image(np.clip(out, 0.0, 1.0))


def digest(image: Image) -> str:
    """Stable content hash over dimensions plus canonical 8-bit pixel bytes.

    The same value is recovered after a PNG round trip, so both sides of an
    HTTP exchange agree on the digest of a transmitted image.
    """
    return _digest_uint8(image.to_uint8())


def _digest_uint8(arr: np.ndarray) -> str:
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    h = hashlib.sha256()
    h.update(f"{arr.shape[1]}x{arr.shape[0]}x{arr.shape[2]}".encode("ascii"))
    h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def digest_of_png_base64(text: str) -> str:
    """Digest of a base64 PNG payload without the float round trip.

    Equals ``digest(from_base64_png(text))`` because the canonical bytes are
    exactly the 8-bit PNG samples.
    """
    try:
        raw = base64.b64decode(text, validate=True)
        pil = PilImage.open(io.BytesIO(raw))
        pil.load()
    except Exception as exc:
        raise InputError(f"cannot decode PNG payload: {exc}") from exc
    if pil.mode not in ("L", "RGB"):
        pil = pil.convert("RGB" if pil.mode not in ("1", "I;16", "I", "F") else "L")
    return _digest_uint8(np.asarray(pil, dtype=np.uint8))


def to_png_bytes(image: Image) -> bytes:
    arr = image.to_uint8()
    if image.channels == 1:
        pil = PilImage.fromarray(arr[:, :, 0], mode="L")
    else:
        pil = PilImage.fromarray(arr, mode="RGB")
    buf = io.BytesIO()
    # low compression: images are small and encoding sits in hot loops
    pil.save(buf, format="PNG", compress_level=1)
    return buf.getvalue()


def from_png_bytes(data: bytes) -> Image:
    try:
        pil = PilImage.open(io.BytesIO(data))
        pil.load()
    except Exception as exc:
        raise InputError(f"cannot decode PNG: {exc}") from exc
    if pil.mode not in ("L", "RGB"):
        pil = pil.convert("RGB" if pil.mode not in ("1", "I;16", "I", "F") else "L")
    arr = np.asarray(pil, dtype=np.float64) / 255.0
    return Image(arr)


def to_base64_png(image: Image) -> str:
    return base64.b64encode(to_png_bytes(image)).decode("ascii")


def from_base64_png(text: str) -> Image:
    try:
        raw = base64.b64decode(text, validate=True)
    except Exception as exc:
        raise InputError(f"invalid base64 payload: {exc}") from exc
    return from_png_bytes(raw)


def save_png(image: Image, path) -> None:
    with open(path, "wb") as fh:
        fh.write(to_png_bytes(image))


def load_png(path) -> Image:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read image file {path}: {exc}") from exc
    return from_png_bytes(data)


def mask_to_png_bytes(mask: np.ndarray) -> bytes:
    """Encode a boolean (H, W) mask as a 1-bit PNG."""
    mask = np.asarray(mask, dtype=bool)
    pil = PilImage.fromarray(mask.astype(np.uint8) * 255, mode="L").convert("1")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def mask_from_png_bytes(data: bytes) -> np.ndarray:
    try:
        pil = PilImage.open(io.BytesIO(data))
        pil.load()
    except Exception as exc:
        raise InputError(f"cannot decode mask PNG: {exc}") from exc
    arr = np.asarray(pil.convert("L"))
    return arr > 0


def mask_to_base64_png(mask: np.ndarray) -> str:
    return base64.b64encode(mask_to_png_bytes(mask)).decode("ascii")


def mask_from_base64_png(text: str) -> np.ndarray:
    try:
        raw = base64.b64decode(text, validate=True)
    except Exception as exc:
        raise InputError(f"invalid base64 payload: {exc}") from exc
    return mask_from_png_bytes(raw)
