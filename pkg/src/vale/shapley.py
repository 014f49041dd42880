"""Shapley attributions over superpixel coalitions.

The attribution game treats each region of a partition as one player; the
value of a coalition is the predicted-class probability of the image with
all other regions masked out. Two estimators are provided:

* exact enumeration of all 2^M coalitions with the classical factorial
  weights (capped at M <= 20),
* an unbiased permutation sampler with antithetic pairs (every sampled
  ordering also contributes its reverse) and a hard budget on model
  evaluations.

Region attributions broadcast to a per-pixel map; the highest-value region
centroids become the point prompts handed to the segmenter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

from .errors import CapacityError, ConfigError, InputError
from .image import Image
from .partition import Coalition, CoalitionMasker, MaskingPolicy, SuperpixelPartition

EXACT_REGION_LIMIT = 20
EFFICIENCY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class EstimatorConfig:
    """Budget and sampling parameters for the permutation estimator."""

    max_evaluations: int = 1000
    batch_size: int = 50
    sampler: str = "permutation"
    seed: int | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batchSize must be >= 1")
        if self.sampler not in ("exact", "permutation"):
            raise ConfigError(f"unknown sampler {self.sampler!r}")
        if self.max_evaluations < 1:
            raise ConfigError("maxEvaluations must be positive")


@dataclass(frozen=True, eq=False)
class AttributionMap:
    """Per-region contributions for one predicted class."""

    region_values: np.ndarray
    target_label: str
    base_value: float
    part: SuperpixelPartition

    def __post_init__(self):
        values = np.asarray(self.region_values, dtype=np.float64)
        values.flags.writeable = False
        object.__setattr__(self, "region_values", values)
        if values.shape != (self.part.region_count,):
            raise InputError("one attribution value per region required")
        if not np.all(np.isfinite(values)) or not math.isfinite(self.base_value):
            raise InputError("attribution values must be finite")

    @property
    def pixel_values(self) -> np.ndarray:
        """Per-pixel broadcast: each pixel takes its region's value."""
        return self.region_values[self.part.labels]

    def to_json_dict(self) -> dict:
        return {
            "regionValues": [float(v) for v in self.region_values],
            "baseValue": float(self.base_value),
            "targetLabel": self.target_label,
        }


@dataclass(frozen=True)
class RoiPoints:
    """Centroids of the top-attribution regions, descending."""

    points: tuple[tuple[float, float], ...]
    k: int
    truncated: bool = False


class BatchedGame:
    """Caches coalition values and issues evaluations in bounded batches."""

    def __init__(self, eval_many: Callable[[list[int]], list[float]],
                 batch_size: int = 50):
        self._eval = eval_many
        self._batch = batch_size
        self._cache: dict[int, float] = {}
        self.evaluations = 0

    def require(self, masks: Iterable[int]) -> None:
        missing, seen = [], set()
        for mask in masks:
            if mask not in self._cache and mask not in seen:
                missing.append(mask)
                seen.add(mask)
        for start in range(0, len(missing), self._batch):
            chunk = missing[start:start + self._batch]
            results = self._eval(chunk)
            if len(results) != len(chunk):
                raise InputError("game evaluator returned a mismatched batch")
            for mask, value in zip(chunk, results):
                self._cache[mask] = float(value)
            self.evaluations += len(chunk)

    def __getitem__(self, mask: int) -> float:
        return self._cache[mask]


def game_from_set_function(fn: Callable[[frozenset[int]], float],
                           m: int) -> Callable[[list[int]], list[float]]:
    """Adapt a synthetic set-function game to the bitmask evaluator interface."""
    def eval_many(masks: list[int]) -> list[float]:
        out = []
        for mask in masks:
            coalition = frozenset(i for i in range(m) if mask >> i & 1)
            out.append(float(fn(coalition)))
        return out
    return eval_many


def game_from_predictor(predict_fn: Callable[[list[Image]], list],
                        image: Image, part: SuperpixelPartition,
                        policy: MaskingPolicy,
                        target_label: str) -> Callable[[list[int]], list[float]]:
    """Coalition value = predicted probability of the target class on the
    masked image."""
    masker = CoalitionMasker(image, part, policy)

    def eval_many(masks: list[int]) -> list[float]:
        images = [masker.mask(Coalition.of(
            i for i in range(part.region_count) if mask >> i & 1))
            for mask in masks]
        predictions = predict_fn(images)
        return [p.probability_of(target_label) for p in predictions]

    return eval_many


def _popcounts(masks: np.ndarray, m: int) -> np.ndarray:
    pc = np.zeros_like(masks)
    for bit in range(m):
        pc += (masks >> bit) & 1
    return pc


def exact_game_values(eval_many: Callable[[list[int]], list[float]], m: int,
                      batch_size: int = 50) -> tuple[np.ndarray, float, float]:
    """Exact Shapley values by full enumeration of 2^m coalitions.

    Returns (phi, empty value, full value). Weight of a subset S not
    containing i is |S|! (m - |S| - 1)! / m!.
    """
    if m < 1:
        raise InputError("game needs at least one player")
    if m > EXACT_REGION_LIMIT:
        raise CapacityError(
            f"exact estimation over {m} regions needs 2^{m} evaluations; "
            "use the permutation sampler instead")
    game = BatchedGame(eval_many, batch_size)
    all_masks = np.arange(2 ** m, dtype=np.int64)
    game.require(range(2 ** m))
    values = np.array([game[int(s)] for s in all_masks])

    fact = [math.factorial(i) for i in range(m + 1)]
    weights = np.array([float(Fraction(fact[s] * fact[m - s - 1], fact[m]))
                        for s in range(m)])
    popcounts = _popcounts(all_masks, m)
    phi = np.zeros(m)
    for i in range(m):
        bit = np.int64(1) << np.int64(i)
        without = all_masks[(all_masks & bit) == 0]
        gains = values[without | bit] - values[without]
        phi[i] = float(np.dot(weights[popcounts[(all_masks & bit) == 0]], gains))
    return phi, values[0], values[-1]


def sampled_game_values(eval_many: Callable[[list[int]], list[float]], m: int,
                        cfg: EstimatorConfig) -> tuple[np.ndarray, float, float]:
    """Antithetic permutation estimate of the Shapley values.

    Consumes at most ``cfg.max_evaluations`` game evaluations (cache hits are
    free) and repairs any residual so the efficiency identity
    ``sum(phi) = v(full) - v(empty)`` holds exactly.
    """
    if m < 1:
        raise InputError("game needs at least one player")
    if cfg.max_evaluations < m + 2:
        raise ConfigError(
            f"maxEvaluations={cfg.max_evaluations} is below the minimum "
            f"{m + 2} for {m} regions")
    game = BatchedGame(eval_many, cfg.batch_size)
    full_mask = (1 << m) - 1
    game.require([0, full_mask])
    v_empty, v_full = game[0], game[full_mask]

    if m == 1:
        return np.array([v_full - v_empty]), v_empty, v_full

    rng = np.random.default_rng(cfg.seed)
    per_perm = m - 1
    budget = cfg.max_evaluations - 2
    n_perms = budget // per_perm
    permutations = []
    for _ in range(n_perms // 2):
        p = rng.permutation(m)
        permutations.append(p)
        permutations.append(p[::-1])
    if not permutations:
        permutations.append(rng.permutation(m))

    prefix_masks = []
    for p in permutations:
        mask = 0
        row = []
        for idx in p[:-1]:
            mask |= 1 << int(idx)
            row.append(mask)
        prefix_masks.append(row)
    game.require(mask for row in prefix_masks for mask in row)

    phi = np.zeros(m)
    for p, row in zip(permutations, prefix_masks):
        previous = v_empty
        for idx, mask in zip(p[:-1], row):
            current = game[mask]
            phi[int(idx)] += current - previous
            previous = current
        phi[int(p[-1])] += v_full - previous
    phi /= len(permutations)

    residual = phi.sum() - (v_full - v_empty)
    magnitude = np.abs(phi).sum()
    if magnitude > 0:
        phi -= residual * np.abs(phi) / magnitude
    else:
        phi -= residual / m
    return phi, v_empty, v_full


def shapley_exact(predict_fn: Callable[[list[Image]], list], image: Image,
                  part: SuperpixelPartition, policy: MaskingPolicy,
                  target_label: str, batch_size: int = 50) -> AttributionMap:
    """Exact region attributions for the target class (M <= 20)."""
    eval_many = game_from_predictor(predict_fn, image, part, policy, target_label)
    phi, base, _ = exact_game_values(eval_many, part.region_count, batch_size)
    return AttributionMap(phi, target_label, base, part)


def shapley_sampled(predict_fn: Callable[[list[Image]], list], image: Image,
                    part: SuperpixelPartition, policy: MaskingPolicy,
                    target_label: str, cfg: EstimatorConfig) -> AttributionMap:
    """Permutation-sampled region attributions under an evaluation budget."""
    eval_many = game_from_predictor(predict_fn, image, part, policy, target_label)
    phi, base, _ = sampled_game_values(eval_many, part.region_count, cfg)
    return AttributionMap(phi, target_label, base, part)


def extract_roi(att: AttributionMap, k: int) -> RoiPoints:
    """Centroids of the k highest-attribution regions, descending.

    Ties break toward the lower region id. Requests beyond the region count
    are truncated and flagged.
    """
    if k < 1:
        raise InputError("k must be >= 1")
    m = att.part.region_count
    order = np.argsort(-att.region_values, kind="stable")
    taken = order[:min(k, m)]
    points = tuple((float(att.part.centroids[i, 0]), float(att.part.centroids[i, 1]))
                   for i in taken)
    return RoiPoints(points=points, k=k, truncated=k > m)


HEATMAP_ALPHA = 0.6
_POSITIVE_COLOR = np.array([1.0, 0.0, 0.0])
_NEGATIVE_COLOR = np.array([0.0, 0.0, 1.0])


def render_heatmap(att: AttributionMap, image: Image) -> Image:
    """Diverging overlay: positive regions red, negative blue, zero clear.

    Values are normalized by max |phi|, so rescaling all attributions leaves
    the render unchanged; an all-zero map returns the plain grayscale copy.
    """
    if att.part.shape != (image.height, image.width):
        raise InputError("attribution and image dimensions differ")
    gray = image.grayscale()
    base = np.repeat(gray[:, :, np.newaxis], 3, axis=2)
    peak = float(np.abs(att.region_values).max())
    if peak == 0.0:
        return Image(base)
    # Round away 1-ulp noise so rescaled maps render pixel-identically.
    normalized = np.round(att.region_values / peak, 12)
    v = normalized[att.part.labels]
    alpha = (HEATMAP_ALPHA * np.abs(v))[:, :, np.newaxis]
    color = np.where((v > 0)[:, :, np.newaxis], _POSITIVE_COLOR, _NEGATIVE_COLOR)
    return Image(np.clip((1.0 - alpha) * base + alpha * color, 0.0, 1.0))
