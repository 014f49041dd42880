"""Uniform interface to image classifiers.

Classifiers are never implemented here; the module exposes a prediction
contract that remote services and built-in analytic test predictors both
satisfy. The two toy predictors are deliberately simple closed-form models
so attribution properties can be verified without any external service:

* ``ToyLinearPredictor`` - per-class logits are linear in grid-cell mean
  intensities (``logits = W @ means + bias``).
* ``ToyPatchPredictor`` - the first class fires on brightness inside a fixed
  window, everything else is background.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from urllib.parse import urlparse

import numpy as np

from .errors import ConfigError, InputError, ProtocolError
from .image import Image, to_base64_png
from .partition import grid_edges
from .transport import Transport

PROBABILITY_SUM_TOLERANCE = 1e-6
RENORMALIZE_LIMIT = 1e-3


@dataclass(frozen=True)
class ClassPrediction:
    """Softmax output of a classifier: class names with their probabilities."""

    labels: tuple[str, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self):
        if len(self.labels) == 0:
            raise InputError("prediction must carry at least one label")
        if len(set(self.labels)) != len(self.labels):
            raise InputError("labels must be unique")
        if len(self.labels) != len(self.probabilities):
            raise InputError("labels and probabilities must have equal length")
        probs = np.asarray(self.probabilities, dtype=np.float64)
        if not np.all(np.isfinite(probs)):
            raise InputError("probabilities must be finite")
        if probs.min() < 0.0 or probs.max() > 1.0:
            raise InputError("probabilities must lie in [0, 1]")
        if abs(float(probs.sum()) - 1.0) > PROBABILITY_SUM_TOLERANCE:
            raise InputError(f"probabilities sum to {probs.sum()}, expected 1")

    def probability_of(self, label: str) -> float:
        try:
            return self.probabilities[self.labels.index(label)]
        except ValueError:
            raise InputError(f"unknown label {label!r}") from None


def top_label(pred: ClassPrediction) -> tuple[str, float]:
    """Label with the maximal probability; ties go to the lowest label index."""
    idx = int(np.argmax(pred.probabilities))
    return pred.labels[idx], pred.probabilities[idx]


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = np.asarray(logits, dtype=np.float64)
    shifted = shifted - shifted.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


class ToyLinearPredictor:
    """Linear classifier over grid-cell mean intensities.

    ``weights`` may be a (classes x features) matrix, or a 1-D vector of
    per-class weights, in which case every class applies its weight uniformly
    to all features (``logits[k] = w[k] * sum(means)``).
    """

    def __init__(self, weights, bias=None, grid=(1, 2), labels=None):
        w = np.asarray(weights, dtype=np.float64)
        self.grid = (int(grid[0]), int(grid[1]))
        n_features = self.grid[0] * self.grid[1]
        if w.ndim == 1:
            w = np.outer(w, np.ones(n_features))
        if w.ndim != 2 or w.shape[1] != n_features:
            raise ConfigError(
                f"weights must be (classes, {n_features}), got {w.shape}")
        self.weights = w
        self.bias = np.zeros(w.shape[0]) if bias is None else np.asarray(bias, dtype=np.float64)
        if self.bias.shape != (w.shape[0],):
            raise ConfigError("bias length must equal the class count")
        self.labels = tuple(labels) if labels is not None else tuple(
            f"class_{k}" for k in range(w.shape[0]))
        if len(self.labels) != w.shape[0]:
            raise ConfigError("label count must equal the class count")

    def predict_batch(self, images: list[Image]) -> list[ClassPrediction]:
        out = []
        for image in images:
            means = grid_cell_means(image, self.grid[0], self.grid[1])
            logits = self.weights @ means + self.bias
            out.append(ClassPrediction(self.labels, tuple(softmax(logits))))
        return out


class ToyPatchPredictor:
    """Two-class detector that fires on mean brightness inside a window.

    ``window`` is (row0, col0, row1, col1), half-open. The positive-class
    logit is ``gain * (window mean - offset)``; the other logit is zero.
    """

    def __init__(self, window, gain: float = 8.0, offset: float = 0.5,
                 labels=("patch", "background")):
        self.window = tuple(int(v) for v in window)
        if len(self.window) != 4:
            raise ConfigError("window must be (row0, col0, row1, col1)")
        r0, c0, r1, c1 = self.window
        if r1 <= r0 or c1 <= c0:
            raise ConfigError("window must be non-empty")
        self.gain = float(gain)
        self.offset = float(offset)
        self.labels = tuple(labels)
        if len(self.labels) != 2:
            raise ConfigError("patch detector is two-class")

    def predict_batch(self, images: list[Image]) -> list[ClassPrediction]:
        r0, c0, r1, c1 = self.window
        out = []
        for image in images:
            if r1 > image.height or c1 > image.width:
                raise InputError(
                    f"window {self.window} exceeds image {image.height}x{image.width}")
            patch_mean = float(image.grayscale()[r0:r1, c0:c1].mean())
            logits = np.array([self.gain * (patch_mean - self.offset), 0.0])
            out.append(ClassPrediction(self.labels, tuple(softmax(logits))))
        return out


class RemotePredictor:
    """Client for the POST /predict wire contract."""

    def __init__(self, endpoint: str, transport: Transport, input_size=None):
        self.endpoint = endpoint.rstrip("/")
        self.transport = transport
        self.input_size = tuple(input_size) if input_size else None

    def predict_batch(self, images: list[Image]) -> list[ClassPrediction]:
        out = []
        for image in images:
            if self.input_size and (image.height, image.width) != self.input_size:
                raise InputError(
                    f"predictor expects {self.input_size}, got "
                    f"{(image.height, image.width)}")
            body = self.transport.post_json(
                self.endpoint + "/predict", {"image": to_base64_png(image)})
            out.append(validate_prediction_payload(body))
        return out


def validate_prediction_payload(body: dict) -> ClassPrediction:
    """Check a /predict response against the wire contract.

    Probability sums are renormalized only when they deviate from 1 by less
    than 1e-3 (float serialization slack); larger deviations mean the service
    is broken and raise :class:`ProtocolError`.
    """
    labels = body.get("labels")
    probabilities = body.get("probabilities")
    if not isinstance(labels, list) or not labels or not all(
            isinstance(l, str) for l in labels):
        raise ProtocolError("predict response: 'labels' must be a non-empty string list")
    if len(set(labels)) != len(labels):
        raise ProtocolError("predict response: labels must be unique")
    if not isinstance(probabilities, list) or len(probabilities) != len(labels):
        raise ProtocolError("predict response: 'probabilities' must match labels")
    try:
        probs = np.asarray(probabilities, dtype=np.float64)
    except (TypeError, ValueError):
        raise ProtocolError("predict response: probabilities must be numeric") from None
    if probs.ndim != 1 or not np.all(np.isfinite(probs)):
        raise ProtocolError("predict response: probabilities must be finite numbers")
    if probs.min() < 0.0 or probs.max() > 1.0:
        raise ProtocolError("predict response: probabilities must lie in [0, 1]")
    total = float(probs.sum())
    if not math.isclose(total, 1.0, abs_tol=RENORMALIZE_LIMIT) or total <= 0.0:
        raise ProtocolError(f"predict response: probabilities sum to {total}")
    probs = probs / total
    return ClassPrediction(tuple(labels), tuple(probs))


@dataclass(frozen=True)
class PredictorHandle:
    """Declarative predictor selection: remote endpoint or a toy model."""

    kind: str
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("remote", "toy-linear", "toy-patch"):
            raise ConfigError(f"unknown predictor kind {self.kind!r}")
        if self.kind == "remote":
            endpoint = self.options.get("endpoint", "")
            parsed = urlparse(endpoint)
            if parsed.scheme not in ("http", "https") or not parsed.netloc:
                raise ConfigError(f"invalid remote endpoint {endpoint!r}")


def build_predictor(handle: PredictorHandle, transport: Transport | None = None):
    opts = handle.options
    if handle.kind == "toy-linear":
        return ToyLinearPredictor(
            weights=opts.get("weights", [1.0, -1.0]),
            bias=opts.get("bias"),
            grid=opts.get("grid", (1, 2)),
            labels=opts.get("labels"))
    if handle.kind == "toy-patch":
        return ToyPatchPredictor(
            window=opts["window"],
            gain=opts.get("gain", 8.0),
            offset=opts.get("offset", 0.5),
            labels=opts.get("labels", ("patch", "background")))
    if transport is None:
        raise ConfigError("remote predictor requires a transport")
    return RemotePredictor(opts["endpoint"], transport,
                           input_size=opts.get("input_size"))


def predict(predictor, images: list[Image]) -> list[ClassPrediction]:
    """Run the predictor on a batch, preserving order.

    All images must share dimensions; toy predictors are pure functions, so
    identical inputs always yield identical outputs.
    """
    if not images:
        raise InputError("prediction batch must be non-empty")
    first = images[0].shape
    for image in images[1:]:
        if image.shape != first:
            raise InputError("all images in a batch must share dimensions")
    return predictor.predict_batch(list(images))


def grid_cell_means(image: Image, rows: int, cols: int) -> np.ndarray:
    """Mean intensity (channel-averaged) of each cell of a rows x cols grid."""
    gray = image.grayscale()
    row_edges = grid_edges(image.height, rows)
    col_edges = grid_edges(image.width, cols)
    means = np.empty(rows * cols)
    for r in range(rows):
        for c in range(cols):
            cell = gray[row_edges[r]:row_edges[r + 1], col_edges[c]:col_edges[c + 1]]
            means[r * cols + c] = cell.mean()
    return means
