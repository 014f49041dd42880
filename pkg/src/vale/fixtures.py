"""Bundled deterministic fixtures.

The bald-eagle sample is procedural numpy art (a bright bird-like shape on
a darker sky), so the test image, its ground-truth masks, and every derived
digest are reproducible from code alone; no binary assets ship with the
package. Canned service values mirror the published sample: the class
predicted at probability 1.0 and a best mask confidence of 0.932.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .image import Image, save_png

BALD_EAGLE_LABELS = ("bald_eagle", "kite", "vulture")
BALD_EAGLE_MASK_CONFIDENCES = (0.811, 0.932, 0.874)  # best is the exact mask
BALD_EAGLE_CAPTION = (
    "The segmented object is a bald eagle isolated on an empty background. "
    "Its head and tail feathers are pale, almost white, against dark brown "
    "plumage on the body; both wings are held out broad and flat as if "
    "mid-glide, and the talons are tucked beneath the body."
)

_SIZE = 224
_BRIGHT_THRESHOLD = 0.65


def _ellipse(rows, cols, center, radii) -> np.ndarray:
    return (((rows - center[0]) / radii[0]) ** 2
            + ((cols - center[1]) / radii[1]) ** 2) <= 1.0


def bald_eagle_image() -> Image:
    """224x224 RGB synthetic sample: bright bird shape on a graded dark sky."""
    n = _SIZE
    rows, cols = np.indices((n, n), dtype=np.float64)

    sky = 0.22 + 0.18 * rows / (n - 1)
    r = sky * 0.55
    g = sky * 0.75
    b = sky * 1.0

    body = _ellipse(rows, cols, (128, 112), (34, 16))
    left_wing = _ellipse(rows, cols, (118, 70), (12, 46))
    right_wing = _ellipse(rows, cols, (118, 154), (12, 46))
    tail = _ellipse(rows, cols, (166, 112), (16, 10))
    head = _ellipse(rows, cols, (92, 112), (14, 11))
    bird = body | left_wing | right_wing | tail | head
    pale = head | tail

    shade = 1.0 - 0.12 * np.abs(cols - 112) / 112.0
    r = np.where(bird, 0.52 * shade, r)
    g = np.where(bird, 0.40 * shade, g)
    b = np.where(bird, 0.30 * shade, b)
    r = np.where(pale, 0.97 * shade, r)
    g = np.where(pale, 0.96 * shade, g)
    b = np.where(pale, 0.93 * shade, b)
    # Lift the dark plumage above the mask threshold while keeping contrast.
    gray = (r + g + b) / 3.0
    boost = np.where(bird & (gray < _BRIGHT_THRESHOLD + 0.08),
                     (_BRIGHT_THRESHOLD + 0.08) - gray, 0.0)
    r, g, b = r + boost, g + boost, b + boost

    data = np.clip(np.stack([r, g, b], axis=2), 0.0, 1.0)
    return Image(data)


def bald_eagle_masks(image: Image) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Three nested masks (eroded, exact, dilated) of the bright bird shape."""
    exact = image.grayscale() > _BRIGHT_THRESHOLD
    small = ndimage.binary_erosion(exact, iterations=3)
    large = ndimage.binary_dilation(exact, iterations=3)
    return small, exact, large


def bald_eagle_window(image: Image) -> tuple[int, int, int, int]:
    """Bounding box (row0, col0, row1, col1) of the bird, half-open."""
    mask = image.grayscale() > _BRIGHT_THRESHOLD
    rows = np.where(mask.any(axis=1))[0]
    cols = np.where(mask.any(axis=0))[0]
    return int(rows[0]), int(cols[0]), int(rows[-1]) + 1, int(cols[-1]) + 1


def save_bald_eagle_png(path) -> None:
    save_png(bald_eagle_image(), path)


def reference_texts() -> list[dict]:
    """Example reference explanations for BLEU evaluation demos and tests."""
    return [
        {"id": "imagenet-bald-eagle", "class": "bald_eagle",
         "text": BALD_EAGLE_CAPTION},
        {"id": "sonar-airplane", "class": "Airplane",
         "text": ("A grainy sonar return shaped like an airplane lying on the "
                  "seabed; the fuselage and both wings are visible while parts "
                  "of the tail fade into the surrounding sediment.")},
        {"id": "sonar-seafloor", "class": "Seafloor",
         "text": ("An uneven stretch of seafloor with ripples and scattered "
                  "rocks, showing no distinct man-made object anywhere in the "
                  "scan.")},
        {"id": "sonar-ship", "class": "Ship",
         "text": ("A sonar image of a sunken ship seen from the side; the "
                  "curved hull and deck structures stand out against the "
                  "flat bottom, with evenly spaced openings along the side "
                  "of the hull.")},
    ]
