"""Superpixel partitions and coalition masking.

A partition assigns every pixel to exactly one region; regions are the
features of the attribution game. Masking a coalition keeps the pixels of
included regions and imputes the rest according to a policy (per-region
mean, fixed color, or Gaussian blur).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InputError
from .image import Image


def grid_edges(n: int, parts: int) -> np.ndarray:
    """Split ``n`` pixels into ``parts`` contiguous runs, remainder to earlier runs."""
    base, rem = divmod(n, parts)
    sizes = np.full(parts, base, dtype=np.int64)
    sizes[:rem] += 1
    return np.concatenate([[0], np.cumsum(sizes)])


@dataclass(frozen=True, eq=False)
class SuperpixelPartition:
    """Per-pixel region labels (row-major), region count, and centroids."""

    labels: np.ndarray
    region_count: int
    centroids: np.ndarray  # (M, 2) float (row, col) in pixel units

    def __post_init__(self):
        labels = np.ascontiguousarray(np.asarray(self.labels, dtype=np.int64))
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        centroids = np.asarray(self.centroids, dtype=np.float64)
        centroids.flags.writeable = False
        object.__setattr__(self, "centroids", centroids)
        m = self.region_count
        if labels.ndim != 2:
            raise InputError("labels must be a 2-D map")
        present = np.bincount(labels.ravel(), minlength=m)
        if labels.min() < 0 or labels.max() >= m or np.any(present == 0):
            raise InputError("region ids must be exactly 0..M-1 with no empty region")
        if centroids.shape != (m, 2):
            raise InputError("one centroid per region required")
        h, w = labels.shape
        if (centroids[:, 0].min() < 0 or centroids[:, 0].max() > h - 1
                or centroids[:, 1].min() < 0 or centroids[:, 1].max() > w - 1):
            raise InputError("centroids must lie inside the image")

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape


@dataclass(frozen=True)
class Coalition:
    """Set of region ids whose pixels stay visible."""

    included: frozenset[int]

    @classmethod
    def of(cls, ids) -> "Coalition":
        return cls(frozenset(int(i) for i in ids))

    @classmethod
    def full(cls, region_count: int) -> "Coalition":
        return cls(frozenset(range(region_count)))

    def validate_for(self, part: SuperpixelPartition) -> None:
        if self.included and (min(self.included) < 0
                              or max(self.included) >= part.region_count):
            raise InputError("coalition contains region ids outside the partition")


@dataclass(frozen=True)
class MaskingPolicy:
    """How hidden regions are imputed.

    Modes: ``mean-fill`` (each hidden region replaced by its own mean color),
    ``fixed-color`` (constant fill value), ``blur`` (Gaussian blur with the
    given radius, in pixels, as sigma).
    """

    mode: str = "blur"
    fill_value: float = 0.5
    blur_radius: float = 8.0

    def __post_init__(self):
        if self.mode not in ("mean-fill", "fixed-color", "blur"):
            raise InputError(f"unknown masking mode {self.mode!r}")
        if self.mode == "fixed-color" and not 0.0 <= self.fill_value <= 1.0:
            raise InputError("fill value must lie in [0, 1]")
        if self.mode == "blur" and self.blur_radius < 1:
            raise InputError("blur radius must be >= 1")


def _centroids_from_labels(labels: np.ndarray, m: int) -> np.ndarray:
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=m).astype(np.float64)
    rows, cols = np.indices(labels.shape)
    row_sum = np.bincount(flat, weights=rows.ravel(), minlength=m)
    col_sum = np.bincount(flat, weights=cols.ravel(), minlength=m)
    return np.stack([row_sum / counts, col_sum / counts], axis=1)


def partition_grid(image: Image, rows: int, cols: int) -> SuperpixelPartition:
    """Axis-aligned grid partition; cell sizes differ by at most one pixel."""
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise InputError("grid must have at least 2 cells")
    if rows > image.height or cols > image.width:
        raise InputError(f"grid {rows}x{cols} exceeds image "
                         f"{image.height}x{image.width}")
    labels = np.empty((image.height, image.width), dtype=np.int64)
    row_edges = grid_edges(image.height, rows)
    col_edges = grid_edges(image.width, cols)
    for r in range(rows):
        for c in range(cols):
            labels[row_edges[r]:row_edges[r + 1],
                   col_edges[c]:col_edges[c + 1]] = r * cols + c
    return SuperpixelPartition(labels, rows * cols,
                               _centroids_from_labels(labels, rows * cols))


def partition_slic(image: Image, target_regions: int, compactness: float = 10.0,
                   iterations: int = 10) -> SuperpixelPartition:
    """Content-adaptive partition: k-means in (color, position) space.

    Seeds start on a regular grid; each iteration assigns pixels within a
    2S window of a cluster center by the SLIC distance
    ``sqrt(d_color^2 + (d_xy / S)^2 * compactness^2)`` and recomputes the
    centers. Components disconnected from their cluster's main body are
    merged into the largest touching neighbor, so regions come out
    connected and the final count stays within [target/2, 2*target].
    """
    h, w = image.height, image.width
    if target_regions < 2:
        raise InputError("targetRegions must be >= 2")
    if target_regions > h * w:
        raise InputError("more regions requested than pixels")
    if iterations < 1:
        raise InputError("iterations must be >= 1")

    step = np.sqrt(h * w / target_regions)
    n_rows = max(1, int(round(np.sqrt(target_regions * h / w))))
    n_cols = int(np.ceil(target_regions / n_rows))
    seed_rows = grid_edges(h, n_rows)
    seed_cols = grid_edges(w, n_cols)
    centers = []
    for r in range(n_rows):
        for c in range(n_cols):
            cr = (seed_rows[r] + seed_rows[r + 1] - 1) / 2.0
            cc = (seed_cols[c] + seed_cols[c + 1] - 1) / 2.0
            centers.append((cr, cc))
    centers = np.asarray(centers, dtype=np.float64)
    k = len(centers)

    data = image.data
    color_centers = np.stack([data[int(round(r)), int(round(c))]
                              for r, c in centers])
    rows_idx, cols_idx = np.indices((h, w))

    assignment = np.zeros((h, w), dtype=np.int64)
    window = max(1, int(np.ceil(2 * step)))
    for _ in range(iterations):
        best = np.full((h, w), np.inf)
        for ki in range(k):
            cr, cc = centers[ki]
            r0 = max(0, int(np.floor(cr)) - window)
            r1 = min(h, int(np.ceil(cr)) + window + 1)
            c0 = max(0, int(np.floor(cc)) - window)
            c1 = min(w, int(np.ceil(cc)) + window + 1)
            patch = data[r0:r1, c0:c1]
            d_color2 = ((patch - color_centers[ki]) ** 2).sum(axis=2)
            d_pos2 = ((rows_idx[r0:r1, c0:c1] - cr) ** 2
                      + (cols_idx[r0:r1, c0:c1] - cc) ** 2)
            dist = d_color2 + d_pos2 / step ** 2 * compactness ** 2
            better = dist < best[r0:r1, c0:c1]
            best[r0:r1, c0:c1][better] = dist[better]
            assignment[r0:r1, c0:c1][better] = ki
        flat = assignment.ravel()
        counts = np.bincount(flat, minlength=k).astype(np.float64)
        occupied = counts > 0
        row_mean = np.bincount(flat, weights=rows_idx.ravel(), minlength=k)
        col_mean = np.bincount(flat, weights=cols_idx.ravel(), minlength=k)
        centers[occupied, 0] = row_mean[occupied] / counts[occupied]
        centers[occupied, 1] = col_mean[occupied] / counts[occupied]
        for c in range(data.shape[2]):
            chan_sum = np.bincount(flat, weights=data[:, :, c].ravel(), minlength=k)
            color_centers[occupied, c] = chan_sum[occupied] / counts[occupied]

    labels = _enforce_connectivity(assignment)
    m = int(labels.max()) + 1
    return SuperpixelPartition(labels, m, _centroids_from_labels(labels, m))


_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def _enforce_connectivity(assignment: np.ndarray) -> np.ndarray:
    """Merge components disconnected from their cluster's largest body."""
    h, w = assignment.shape
    comp = np.full((h, w), -1, dtype=np.int64)
    next_comp = 0
    comp_label = []
    for lab in np.unique(assignment):
        labeled, n = ndimage.label(assignment == lab, structure=_FOUR_CONNECTED)
        for i in range(1, n + 1):
            comp[labeled == i] = next_comp
            comp_label.append(lab)
            next_comp += 1

    sizes = np.bincount(comp.ravel(), minlength=next_comp)
    primary = np.zeros(next_comp, dtype=bool)
    for lab in np.unique(assignment):
        members = [ci for ci in range(next_comp) if comp_label[ci] == lab]
        primary[max(members, key=lambda ci: (sizes[ci], -ci))] = True

    resolved = primary.copy()
    region_of = np.where(primary, np.arange(next_comp), -1)
    pending = [ci for ci in range(next_comp) if not resolved[ci]]
    while pending:
        progressed = False
        still = []
        for ci in pending:
            mask = comp == ci
            ring = ndimage.binary_dilation(mask, structure=_FOUR_CONNECTED) & ~mask
            neighbor_comps = np.unique(comp[ring])
            candidates = [nc for nc in neighbor_comps if nc >= 0 and resolved[nc]]
            if not candidates:
                still.append(ci)
                continue
            target = max(candidates, key=lambda nc: (sizes[region_of[nc]], -nc))
            region_of[ci] = region_of[target]
            sizes[region_of[ci]] += sizes[ci]
            resolved[ci] = True
            progressed = True
        if not progressed:
            # Only orphans touching orphans remain; absorb into any neighbor.
            ci = still[0]
            mask = comp == ci
            ring = ndimage.binary_dilation(mask, structure=_FOUR_CONNECTED) & ~mask
            neighbor = int(np.unique(comp[ring])[0])
            region_of[ci] = neighbor
            resolved[ci] = True
            still.remove(ci)
        pending = still

    merged = region_of[comp]
    # Canonical ids in row-major first-occurrence order.
    _, first_index = np.unique(merged.ravel(), return_index=True)
    order = np.argsort(first_index)
    remap = np.empty(next_comp, dtype=np.int64)
    remap[np.unique(merged.ravel())[order]] = np.arange(len(order))
    return remap[merged]


class CoalitionMasker:
    """Precomputes the fill image so many coalitions can be masked cheaply."""

    def __init__(self, image: Image, part: SuperpixelPartition,
                 policy: MaskingPolicy):
        if part.shape != (image.height, image.width):
            raise InputError("partition and image dimensions differ")
        self.image = image
        self.part = part
        self.policy = policy
        self._fill = self._build_fill()

    def _build_fill(self) -> np.ndarray:
        data = self.image.data
        if self.policy.mode == "fixed-color":
            return np.full_like(data, self.policy.fill_value)
        if self.policy.mode == "mean-fill":
            flat = self.part.labels.ravel()
            m = self.part.region_count
            counts = np.bincount(flat, minlength=m).astype(np.float64)
            fill = np.empty_like(data)
            for c in range(data.shape[2]):
                sums = np.bincount(flat, weights=data[:, :, c].ravel(), minlength=m)
                fill[:, :, c] = (sums / counts)[self.part.labels]
            return fill
        blurred = np.empty_like(data)
        for c in range(data.shape[2]):
            blurred[:, :, c] = ndimage.gaussian_filter(
                data[:, :, c], sigma=self.policy.blur_radius, mode="reflect")
        return np.clip(blurred, 0.0, 1.0)

    def mask(self, coalition: Coalition) -> Image:
        coalition.validate_for(self.part)
        member = np.zeros(self.part.region_count, dtype=bool)
        if coalition.included:
            member[list(coalition.included)] = True
        keep = member[self.part.labels]
        out = np.where(keep[:, :, np.newaxis], self.image.data, self._fill)
        return Image(out)


def mask_coalition(image: Image, part: SuperpixelPartition, coalition: Coalition,
                   policy: MaskingPolicy) -> Image:
    """Keep the coalition's pixels, impute the rest per the policy.

    The full coalition returns the original pixel values bit-exactly.
    """
    return CoalitionMasker(image, part, policy).mask(coalition)
