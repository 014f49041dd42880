"""Real-mode model adapters.

Deep-learning dependencies stay behind lazy imports so the shim package
installs without them; any load failure surfaces as ShimStartupError at
service startup, never mid-request. Identifiers:

* classifier:  "torchvision/<model_name>" (pretrained ImageNet weights)
* segmenter:   "flood-fill[:tolerance]" (point-seeded flood fill at three
               tolerance scales, a dependency-light stand-in with the same
               three-mask contract as promptable segmentation models)
* captioner:   "transformers/<model_id>" (image-to-text pipeline)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ShimConfig
from .imaging import mask_to_base64_png


class ShimStartupError(RuntimeError):
    pass


@dataclass
class Adapters:
    classifier: object
    segmenter: object
    captioner: object


def load_adapters(config: ShimConfig) -> Adapters:
    return Adapters(classifier=_load_classifier(config),
                    segmenter=_load_segmenter(config),
                    captioner=_load_captioner(config))


def _load_classifier(config: ShimConfig):
    identifier = config.classifier_model
    if not identifier.startswith("torchvision/"):
        raise ShimStartupError(f"unknown classifier identifier {identifier!r}")
    name = identifier.split("/", 1)[1]
    try:
        import torch
        import torchvision.models as models

        weights_enum = models.get_model_weights(name)
        weights = weights_enum.DEFAULT
        model = models.get_model(name, weights=weights).to(config.device)
        model.eval()
        preprocess = weights.transforms()
        categories = list(weights.meta["categories"])
    except Exception as exc:
        raise ShimStartupError(f"cannot load classifier {identifier!r}: "
                               f"{exc}") from exc

    def classify(arr: np.ndarray) -> dict:
        import torch
        from PIL import Image as PilImage

        rgb = arr if arr.shape[2] == 3 else np.repeat(arr, 3, axis=2)
        tensor = preprocess(PilImage.fromarray(rgb)).unsqueeze(0).to(config.device)
        with torch.no_grad():
            probs = torch.softmax(model(tensor)[0], dim=0).cpu().numpy()
        probs = probs / probs.sum()
        return {"labels": categories,
                "probabilities": [float(p) for p in probs]}

    return classify


def _load_segmenter(config: ShimConfig):
    identifier = config.segmenter_model
    if not identifier.startswith("flood-fill"):
        raise ShimStartupError(f"unknown segmenter identifier {identifier!r}")
    tolerance = 0.15
    if ":" in identifier:
        try:
            tolerance = float(identifier.split(":", 1)[1])
        except ValueError as exc:
            raise ShimStartupError(f"bad tolerance in {identifier!r}") from exc
    try:
        from scipy import ndimage
    except Exception as exc:  # pragma: no cover - scipy is ubiquitous
        raise ShimStartupError(f"segmenter needs scipy: {exc}") from exc

    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

    def segment(arr: np.ndarray, points, labels) -> dict:
        gray = arr.astype(np.float64).mean(axis=2) / 255.0
        h, w = gray.shape
        seeds = [(int(r), int(c)) for (r, c), flag in zip(points, labels)
                 if flag == 1 and 0 <= int(r) < h and 0 <= int(c) < w]
        if not seeds:
            seeds = [(int(points[0][0]), int(points[0][1]))]
        seed_mean = float(np.mean([gray[r, c] for r, c in seeds]))
        masks = []
        for scale in (0.5 * tolerance, tolerance, 2.0 * tolerance):
            admitted = np.abs(gray - seed_mean) <= scale
            components, _ = ndimage.label(admitted, structure=structure)
            keep = {int(components[r, c]) for r, c in seeds
                    if admitted[r, c]}
            mask = np.isin(components, sorted(keep - {0}))
            confidence = _boundary_contrast(gray, mask)
            masks.append({"png": mask_to_base64_png(mask),
                          "confidence": confidence})
        return {"masks": masks}

    return segment


def _boundary_contrast(gray: np.ndarray, mask: np.ndarray) -> float:
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


def _load_captioner(config: ShimConfig):
    identifier = config.captioner_model
    if not identifier.startswith("transformers/"):
        raise ShimStartupError(f"unknown captioner identifier {identifier!r}")
    model_id = identifier.split("/", 1)[1]
    try:
        from transformers import pipeline

        captioner = pipeline("image-to-text", model=model_id,
                             device=-1 if config.device == "cpu" else 0)
    except Exception as exc:
        raise ShimStartupError(f"cannot load captioner {identifier!r}: "
                               f"{exc}") from exc

    def caption(arr: np.ndarray, prompt: str, temperature: float,
                max_tokens: int) -> dict:
        from PIL import Image as PilImage

        rgb = arr if arr.shape[2] == 3 else np.repeat(arr, 3, axis=2)
        outputs = captioner(PilImage.fromarray(rgb),
                            max_new_tokens=min(max_tokens, 256))
        text = outputs[0]["generated_text"].strip() or "(no caption)"
        return {"text": text, "model": model_id}

    return caption
