"""Point-prompted object segmentation and best-mask selection.

Two mask sources share one contract: a built-in deterministic region grower
(three tolerance scales, mirroring the three-mask convention of zero-shot
segmentation services) and a client for a remote /segment endpoint. Either
way the highest-confidence candidate wins and the background is zeroed so
the object keeps its original coordinates for captioning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InputError, ProtocolError
from .image import Image, mask_from_base64_png, to_base64_png
from .transport import Transport


@dataclass(frozen=True)
class PointPrompt:
    """Seed coordinates with per-point foreground flags."""

    points: tuple[tuple[int, int], ...]
    point_labels: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.points) < 1:
            raise InputError("prompt needs at least one point")
        labels = self.point_labels or tuple(1 for _ in self.points)
        if len(labels) != len(self.points):
            raise InputError("one label per point required")
        object.__setattr__(self, "point_labels", tuple(int(v) for v in labels))
        object.__setattr__(
            self, "points",
            tuple((int(round(r)), int(round(c))) for r, c in self.points))

    def validate_for(self, image: Image) -> None:
        for r, c in self.points:
            if not (0 <= r < image.height and 0 <= c < image.width):
                raise InputError(f"prompt point ({r}, {c}) outside image")

    def foreground_points(self) -> list[tuple[int, int]]:
        return [p for p, lab in zip(self.points, self.point_labels) if lab == 1]


@dataclass(frozen=True, eq=False)
class MaskCandidate:
    """One segmentation proposal: boolean mask plus confidence score."""

    mask: np.ndarray
    confidence: float

    def __post_init__(self):
        mask = np.ascontiguousarray(np.asarray(self.mask, dtype=bool))
        mask.flags.writeable = False
        object.__setattr__(self, "mask", mask)
        if mask.ndim != 2:
            raise InputError("mask must be 2-D")
        if not math.isfinite(self.confidence):
            raise InputError("confidence must be finite")

    @property
    def area(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True, eq=False)
class SegmentedObject:
    """Chosen mask applied to the image: background pixels zeroed."""

    image: Image
    mask: MaskCandidate
    source: str


_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def _grow(gray: np.ndarray, seeds: list[tuple[int, int]], seed_mean: float,
          tolerance: float) -> np.ndarray:
    admitted = np.abs(gray - seed_mean) <= tolerance
    eligible = [(r, c) for r, c in seeds if admitted[r, c]]
    if not eligible:
        return np.zeros_like(admitted)
    components, _ = ndimage.label(admitted, structure=_FOUR_CONNECTED)
    keep = {int(components[r, c]) for r, c in eligible}
    return np.isin(components, sorted(keep))


def boundary_contrast(gray: np.ndarray, mask: np.ndarray) -> float:
    """Mean intensity gap across the mask boundary (4-neighbor pairs), in [0, 1].

    Masks with no boundary (empty or full-image) score 0.
    """
    if not mask.any() or mask.all():
        return 0.0
    gaps = []
    for axis in (0, 1):
        a = np.take(mask, range(mask.shape[axis] - 1), axis=axis)
        b = np.take(mask, range(1, mask.shape[axis]), axis=axis)
        ga = np.take(gray, range(gray.shape[axis] - 1), axis=axis)
        gb = np.take(gray, range(1, gray.shape[axis]), axis=axis)
        crossing = a != b
        if crossing.any():
            gaps.append(np.abs(ga - gb)[crossing])
    if not gaps:
        return 0.0
    return float(np.clip(np.concatenate(gaps).mean(), 0.0, 1.0))


def segment_builtin(image: Image, prompt: PointPrompt,
                    tolerance: float) -> list[MaskCandidate]:
    """Region-grow (4-connectivity) from the foreground points at three
    tolerance scales {0.5t, t, 2t}.

    Pixels join a mask when their intensity lies within the scaled tolerance
    of the seed mean and they connect to a seed. Confidence is the boundary
    contrast of the grown mask. If even the widest tolerance admits nothing,
    a single empty candidate with confidence 0 is returned.
    """
    if not 0.0 < tolerance <= 1.0:
        raise InputError("tolerance must lie in (0, 1]")
    prompt.validate_for(image)
    seeds = prompt.foreground_points()
    if not seeds:
        raise InputError("prompt needs at least one foreground point")
    gray = image.grayscale()
    seed_mean = float(np.mean([gray[r, c] for r, c in seeds]))
    candidates = []
    for scale in (0.5 * tolerance, tolerance, 2.0 * tolerance):
        mask = _grow(gray, seeds, seed_mean, scale)
        candidates.append(MaskCandidate(mask, boundary_contrast(gray, mask)))
    if not candidates[-1].mask.any():
        return [MaskCandidate(np.zeros((image.height, image.width), dtype=bool), 0.0)]
    return candidates


def validate_segment_payload(body: dict, image: Image) -> list[MaskCandidate]:
    """Decode and check a /segment response against the wire contract."""
    masks = body.get("masks")
    if not isinstance(masks, list):
        raise ProtocolError("segment response: 'masks' must be a list")
    if len(masks) == 0:
        raise ProtocolError("segment response: service returned zero masks")
    candidates = []
    for i, entry in enumerate(masks):
        if not isinstance(entry, dict) or "png" not in entry or "confidence" not in entry:
            raise ProtocolError(
                f"segment response: mask {i} must carry 'png' and 'confidence'")
        if not isinstance(entry["png"], str):
            raise ProtocolError(f"segment response: mask {i} png must be base64 text")
        try:
            mask = mask_from_base64_png(entry["png"])
        except InputError as exc:
            raise ProtocolError(f"segment response: mask {i}: {exc}") from exc
        if mask.shape != (image.height, image.width):
            raise ProtocolError(
                f"segment response: mask {i} is {mask.shape}, image is "
                f"{(image.height, image.width)}")
        confidence = entry["confidence"]
        if not isinstance(confidence, (int, float)) or isinstance(confidence, bool) \
                or not math.isfinite(float(confidence)):
            raise ProtocolError(f"segment response: mask {i} confidence invalid")
        candidates.append(MaskCandidate(mask, float(confidence)))
    return candidates


def segment_remote(endpoint: str, image: Image, prompt: PointPrompt,
                   transport: Transport) -> list[MaskCandidate]:
    """Fetch mask candidates from a remote point-prompted segmentation service."""
    prompt.validate_for(image)
    body = transport.post_json(endpoint.rstrip("/") + "/segment", {
        "image": to_base64_png(image),
        "points": [[r, c] for r, c in prompt.points],
        "labels": list(prompt.point_labels),
    })
    return validate_segment_payload(body, image)


def select_best(candidates: list[MaskCandidate], image: Image,
                source: str = "builtin") -> SegmentedObject:
    """Highest confidence wins; ties go to the larger mask, then to mask
    content, so the choice never depends on candidate order."""
    if not candidates:
        raise InputError("need at least one mask candidate")
    for cand in candidates:
        if cand.mask.shape != (image.height, image.width):
            raise InputError("candidate mask does not match image dimensions")
    best = max(candidates,
               key=lambda c: (c.confidence, c.area, c.mask.tobytes()))
    masked = image.data * best.mask[:, :, np.newaxis]
    return SegmentedObject(Image(masked), best, source)
