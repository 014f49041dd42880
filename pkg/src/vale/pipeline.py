"""End-to-end orchestration: classify, attribute, extract ROI, segment,
prompt, caption, report.

Every run persists its intermediate artifacts (heatmap, ROI-annotated image,
mask, segmented object) next to a canonical ``record.json``. The record is
byte-reproducible for a fixed seed and mock services, so volatile stage
timings go to a sibling ``timings.json`` instead of the record file.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .bleu import bleu as bleu_score
from .bleu import load_references, tokenize
from .errors import ConfigError, InputError, ValeError
from .gateway import PredictorHandle, build_predictor, predict, top_label
from .image import Image, load_png, save_png, mask_to_png_bytes
from .mockservices import MOCK_BASE_URL, MockTransport, build_bundle
from .partition import MaskingPolicy, partition_grid, partition_slic
from .prompts import PromptRegistry, render
from .captioning import CaptionClient, CaptionRequest
from .segment import PointPrompt, segment_builtin, segment_remote, select_best
from .shapley import (AttributionMap, EstimatorConfig, exact_game_values,
                      extract_roi, game_from_predictor, render_heatmap,
                      sampled_game_values)
from .transport import HttpTransport

SCHEMA_VERSION = 1
STAGE_ORDER = ("load", "classify", "attribute", "roi", "segment", "prompt",
               "caption", "report")

DEFAULT_CONFIG = {
    "predictor": {"kind": "remote"},
    "inputSize": [224, 224],
    "partition": {"mode": "slic", "targetRegions": 196, "compactness": 10.0,
                  "iterations": 10, "rows": 14, "cols": 14},
    "masking": {"mode": "blur", "fillValue": 0.5, "blurRadius": 8.0},
    "estimator": {"maxEvaluations": 1000, "batchSize": 50,
                  "sampler": "permutation", "seed": None},
    "roiK": 1,
    "segmenter": {"source": "builtin", "tolerance": 0.15},
    "promptId": "default-imagenet",
    "templatesPath": None,
    "caption": {"temperature": 0.2, "maxTokens": 1024},
    "services": {"mode": "mock", "fixture": "bald-eagle",
                 "baseUrl": MOCK_BASE_URL, "timeoutSeconds": 30.0,
                 "attempts": 3, "maxInFlight": 8},
    "outputDir": None,
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


@dataclass
class PipelineConfig:
    """Validated pipeline settings; see DEFAULT_CONFIG for the JSON shape."""

    raw: dict

    @classmethod
    def from_dict(cls, overrides: dict | None = None) -> "PipelineConfig":
        merged = _deep_merge(DEFAULT_CONFIG, overrides or {})
        cfg = cls(raw=merged)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must contain a JSON object")
        return cls.from_dict(data)

    def validate(self) -> None:
        self.predictor_handle()
        self.masking_policy()
        self.estimator_config()
        if self.raw["roiK"] < 1:
            raise ConfigError("roiK must be >= 1")
        if self.raw["segmenter"]["source"] not in ("builtin", "remote"):
            raise ConfigError("segmenter source must be builtin or remote")
        if self.raw["services"]["mode"] not in ("mock", "http"):
            raise ConfigError("services mode must be mock or http")
        size = self.raw["inputSize"]
        if len(size) != 2 or size[0] < 1 or size[1] < 1:
            raise ConfigError("inputSize must be [height, width]")

    def predictor_handle(self) -> PredictorHandle:
        spec = dict(self.raw["predictor"])
        kind = spec.pop("kind", "remote")
        if kind == "remote" and "endpoint" not in spec:
            spec["endpoint"] = self.raw["services"]["baseUrl"]
        return PredictorHandle(kind=kind, options=spec)

    def masking_policy(self) -> MaskingPolicy:
        m = self.raw["masking"]
        return MaskingPolicy(mode=m["mode"], fill_value=m["fillValue"],
                             blur_radius=m["blurRadius"])

    def estimator_config(self, seed: int | None = None,
                         max_evaluations: int | None = None) -> EstimatorConfig:
        e = self.raw["estimator"]
        return EstimatorConfig(
            max_evaluations=max_evaluations or e["maxEvaluations"],
            batch_size=e["batchSize"], sampler=e["sampler"],
            seed=e["seed"] if seed is None else seed)

    def snapshot(self) -> dict:
        """Config as recorded: canonical ordering, output directory elided."""
        snap = json.loads(json.dumps(self.raw, sort_keys=True))
        snap["outputDir"] = None
        return snap


class Runtime:
    """Transport, predictor, and prompt registry resolved from a config."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        services = config.raw["services"]
        if services["mode"] == "mock":
            self.transport = MockTransport(build_bundle(services["fixture"]))
        else:
            self.transport = HttpTransport(timeout=services["timeoutSeconds"],
                                           attempts=services["attempts"],
                                           max_in_flight=services["maxInFlight"])
        self.base_url = services["baseUrl"]
        self.predictor = build_predictor(config.predictor_handle(), self.transport)
        self.registry = PromptRegistry()
        if config.raw["templatesPath"]:
            self.registry.load_file(config.raw["templatesPath"])

    def segment_endpoint(self) -> str:
        return self.config.raw["segmenter"].get("endpoint") or self.base_url

    def caption_endpoint(self) -> str:
        return self.config.raw["caption"].get("endpoint") or self.base_url


@dataclass
class ExplanationRecord:
    """Everything one pipeline run produced, plus per-stage timings."""

    input_path: str
    seed: int
    config: dict
    working_size: tuple[int, int] | None = None
    stages: list[str] = field(default_factory=list)
    prediction: dict | None = None
    attribution: dict | None = None
    roi: dict | None = None
    mask: dict | None = None
    prompt: dict | None = None
    caption: dict | None = None
    bleu: dict | None = None
    artifacts: dict = field(default_factory=dict)
    stage_millis: dict = field(default_factory=dict)
    total_millis: float = 0.0
    error: dict | None = None

    def to_json_dict(self) -> dict:
        out = {
            "schemaVersion": SCHEMA_VERSION,
            "inputPath": self.input_path,
            "seed": self.seed,
            "config": self.config,
            "stages": list(self.stages),
            "artifacts": dict(self.artifacts),
        }
        if self.working_size is not None:
            out["workingSize"] = list(self.working_size)
        for key, value in (("prediction", self.prediction),
                           ("attribution", self.attribution),
                           ("roi", self.roi), ("mask", self.mask),
                           ("prompt", self.prompt), ("caption", self.caption),
                           ("bleu", self.bleu), ("error", self.error)):
            if value is not None:
                out[key] = value
        return out

    @property
    def succeeded(self) -> bool:
        return self.error is None


def record_schema() -> dict:
    text = resources.files("vale.schemas").joinpath(
        "explanation_record.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate_record(record_dict: dict) -> None:
    import jsonschema

    jsonschema.validate(record_dict, record_schema())


class _Timer:
    def __init__(self, record: ExplanationRecord, stage: str):
        self.record = record
        self.stage = stage

    def __enter__(self):
        self._start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.record.stage_millis[self.stage] = max(
            0.0, (time.perf_counter() - self._start) * 1000.0)
        if exc_type is None:
            self.record.stages.append(self.stage)
        return False


def _draw_points(image: Image, points, arm: int = 6) -> Image:
    """Copy of the image with a magenta cross at each (row, col) point."""
    data = np.array(image.data)
    if data.shape[2] == 1:
        data = np.repeat(data, 3, axis=2)
    magenta = np.array([1.0, 0.0, 1.0])
    h, w = data.shape[:2]
    for pr, pc in points:
        r, c = int(round(pr)), int(round(pc))
        for d in range(-arm, arm + 1):
            for rr, cc in ((r + d, c), (r, c + d), (r + d, c + d), (r + d, c - d)):
                if 0 <= rr < h and 0 <= cc < w:
                    data[rr, cc] = magenta
    return Image(data)


def _write_canonical_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def explain(config: PipelineConfig, image_path, out_dir,
            seed: int | None = None, bleu_refs_path=None,
            bleu_reference_id: str | None = None,
            runtime: Runtime | None = None) -> ExplanationRecord:
    """Run the full pipeline on one image and persist record + artifacts.

    Stage failures produce a record listing the completed stages and a
    structured error instead of raising; the caller decides the exit code.
    """
    started = time.perf_counter()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if seed is None:
        cfg_seed = config.raw["estimator"]["seed"]
        seed = cfg_seed if cfg_seed is not None else int.from_bytes(
            np.random.SeedSequence().entropy.to_bytes(16, "little")[:4], "little")
    record = ExplanationRecord(input_path=str(image_path), seed=int(seed),
                               config=config.snapshot())
    runtime = runtime or Runtime(config)

    try:
        with _Timer(record, "load"):
            image = load_png(image_path)
            h, w = config.raw["inputSize"]
            working = image.resize_bilinear(h, w)
            record.working_size = (working.height, working.width)

        with _Timer(record, "classify"):
            prediction = predict(runtime.predictor, [working])[0]
            label, probability = top_label(prediction)
            record.prediction = {"label": label, "probability": probability}

        with _Timer(record, "attribute"):
            part = _build_partition(config, working)
            policy = config.masking_policy()
            predict_fn = lambda images: predict(runtime.predictor, images)
            estimator = config.estimator_config(seed=seed)
            eval_many = game_from_predictor(predict_fn, working, part, policy, label)
            if estimator.sampler == "exact":
                phi, base, _ = exact_game_values(eval_many, part.region_count,
                                                 estimator.batch_size)
            else:
                phi, base, _ = sampled_game_values(eval_many, part.region_count,
                                                   estimator)
            att = AttributionMap(phi, label, base, part)
            record.attribution = _attribution_summary(att)

        with _Timer(record, "roi"):
            roi = extract_roi(att, config.raw["roiK"])
            record.roi = {"points": [[r, c] for r, c in roi.points],
                          "k": roi.k, "truncated": roi.truncated}

        with _Timer(record, "segment"):
            prompt_points = PointPrompt(roi.points)
            seg_cfg = config.raw["segmenter"]
            if seg_cfg["source"] == "builtin":
                candidates = segment_builtin(working, prompt_points,
                                             seg_cfg["tolerance"])
            else:
                candidates = segment_remote(runtime.segment_endpoint(), working,
                                            prompt_points, runtime.transport)
            segmented = select_best(candidates, working, source=seg_cfg["source"])
            record.mask = {"confidence": segmented.mask.confidence,
                           "source": segmented.source,
                           "area": segmented.mask.area}

        with _Timer(record, "prompt"):
            template = runtime.registry.get(config.raw["promptId"])
            bundle = render(template, label)
            record.prompt = {"templateId": bundle.template_id,
                             "label": bundle.label, "text": bundle.rendered}

        with _Timer(record, "caption"):
            client = CaptionClient(runtime.caption_endpoint(), runtime.transport)
            response = client.caption(CaptionRequest(
                image=segmented.image, prompt=bundle.rendered,
                temperature=config.raw["caption"]["temperature"],
                max_tokens=config.raw["caption"]["maxTokens"]))
            record.caption = {"text": response.text, "model": response.model}

        with _Timer(record, "report"):
            if bleu_refs_path and bleu_reference_id:
                refs = load_references(bleu_refs_path)
                if bleu_reference_id not in refs:
                    raise InputError(f"unknown reference id {bleu_reference_id!r}")
                report = bleu_score(
                    tokenize(response.text),
                    [tokenize(refs[bleu_reference_id]["text"])])
                record.bleu = report.to_json_dict()
            save_png(render_heatmap(att, working), out_dir / "heatmap.png")
            save_png(_draw_points(working, roi.points), out_dir / "roi.png")
            (out_dir / "mask.png").write_bytes(mask_to_png_bytes(segmented.mask.mask))
            save_png(segmented.image, out_dir / "segmented.png")
            record.artifacts = {"heatmap": "heatmap.png", "roiAnnotated": "roi.png",
                                "mask": "mask.png", "segmented": "segmented.png"}
    except ValeError as exc:
        failed_stage = _current_stage(record)
        record.error = {"stage": failed_stage,
                        "errorClass": type(exc).__name__,
                        "message": str(exc)}

    record.total_millis = (time.perf_counter() - started) * 1000.0
    _write_canonical_json(out_dir / "record.json", record.to_json_dict())
    _write_canonical_json(out_dir / "timings.json", {
        "stageMillis": record.stage_millis,
        "totalMillis": record.total_millis,
    })
    return record


def _current_stage(record: ExplanationRecord) -> str:
    done = set(record.stages)
    for stage in STAGE_ORDER:
        if stage not in done:
            return stage
    return STAGE_ORDER[-1]


def _build_partition(config: PipelineConfig, image: Image):
    p = config.raw["partition"]
    if p["mode"] == "grid":
        return partition_grid(image, p["rows"], p["cols"])
    if p["mode"] == "slic":
        return partition_slic(image, p["targetRegions"], p["compactness"],
                              p["iterations"])
    raise ConfigError(f"unknown partition mode {p['mode']!r}")


def _attribution_summary(att: AttributionMap, top: int = 5) -> dict:
    order = np.argsort(-att.region_values, kind="stable")[:top]
    return {
        "targetLabel": att.target_label,
        "baseValue": float(att.base_value),
        "regionCount": att.part.region_count,
        "topRegions": [
            {"region": int(i), "value": float(att.region_values[i]),
             "centroid": [float(att.part.centroids[i, 0]),
                          float(att.part.centroids[i, 1])]}
            for i in order
        ],
    }


def batch(config: PipelineConfig, manifest_path, out_dir,
          jobs: int = 1) -> dict:
    """Explain every image in a manifest; failures stay per-image."""
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read manifest {manifest_path}: {exc}") from exc
    if not isinstance(manifest, list) or not manifest:
        raise InputError("manifest must be a non-empty JSON list")
    entries = []
    for item in manifest:
        if isinstance(item, str):
            entries.append({"path": item})
        elif isinstance(item, dict) and "path" in item:
            entries.append(item)
        else:
            raise InputError("manifest entries must be paths or {'path': ...}")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runtime = Runtime(config)

    def run_one(index_entry):
        index, entry = index_entry
        stem = Path(entry["path"]).stem or "image"
        item_dir = out_dir / f"{index:03d}_{stem}"
        return index, explain(config, entry["path"], item_dir,
                              runtime=runtime)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(run_one, enumerate(entries)))
    results.sort(key=lambda pair: pair[0])
    records = [rec for _, rec in results]

    successes = [r for r in records if r.succeeded]
    stage_means = {}
    for stage in STAGE_ORDER:
        samples = [r.stage_millis[stage] for r in successes
                   if stage in r.stage_millis]
        if samples:
            stage_means[stage] = sum(samples) / len(samples)
    summary = {
        "images": len(records),
        "successCount": len(successes),
        "failureCount": len(records) - len(successes),
        "meanStageMillis": stage_means,
        "errors": [{"inputPath": r.input_path, **r.error}
                   for r in records if r.error],
        "records": [f"{i:03d}_{Path(e['path']).stem or 'image'}/record.json"
                    for i, e in enumerate(entries)],
    }
    _write_canonical_json(out_dir / "summary.json", summary)
    return summary


def _mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def ablate(config: PipelineConfig, image_path, eval_counts, out_dir,
           seed: int | None = None) -> dict:
    """Sweep the evaluation budget and measure ROI drift and mask IoU
    against a reference run (exact attribution when M <= 12, otherwise the
    largest budget)."""
    if not eval_counts:
        raise InputError("need at least one evaluation count")
    eval_counts = sorted(int(c) for c in eval_counts)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runtime = Runtime(config)
    if seed is None:
        seed = config.raw["estimator"]["seed"] or 0

    image = load_png(image_path)
    h, w = config.raw["inputSize"]
    working = image.resize_bilinear(h, w)
    prediction = predict(runtime.predictor, [working])[0]
    label, _ = top_label(prediction)
    part = _build_partition(config, working)
    policy = config.masking_policy()
    m = part.region_count
    for count in eval_counts:
        if count < m + 2:
            raise ConfigError(f"budget {count} below minimum {m + 2} for "
                              f"{m} regions")

    cache: dict[int, float] = {}
    raw_eval = game_from_predictor(
        lambda images: predict(runtime.predictor, images),
        working, part, policy, label)

    def eval_many(masks):
        missing = [mk for mk in masks if mk not in cache]
        if missing:
            for mk, value in zip(missing, raw_eval(missing)):
                cache[mk] = value
        return [cache[mk] for mk in masks]

    def run_segmentation(att):
        roi = extract_roi(att, config.raw["roiK"])
        prompt_points = PointPrompt(roi.points)
        seg_cfg = config.raw["segmenter"]
        if seg_cfg["source"] == "builtin":
            candidates = segment_builtin(working, prompt_points,
                                         seg_cfg["tolerance"])
        else:
            candidates = segment_remote(runtime.segment_endpoint(), working,
                                        prompt_points, runtime.transport)
        return roi, select_best(candidates, working,
                                source=seg_cfg["source"])

    batch_size = config.raw["estimator"]["batchSize"]
    runs = {}
    for count in eval_counts:
        cfg = config.estimator_config(seed=seed, max_evaluations=count)
        phi, base, _ = sampled_game_values(eval_many, m, cfg)
        att = AttributionMap(phi, label, base, part)
        runs[count] = (att,) + run_segmentation(att)

    if m <= 12:
        phi, base, _ = exact_game_values(eval_many, m, batch_size)
        ref_att = AttributionMap(phi, label, base, part)
        ref_roi, ref_seg = run_segmentation(ref_att)
        reference_kind = "exact"
    else:
        ref_att, ref_roi, ref_seg = runs[eval_counts[-1]]
        reference_kind = "largest-budget"

    rows = []
    panels = []
    for count in eval_counts:
        att, roi, seg = runs[count]
        drift = math.dist(roi.points[0], ref_roi.points[0])
        iou = _mask_iou(seg.mask.mask, ref_seg.mask.mask)
        budget_dir = out_dir / f"budget_{count}"
        budget_dir.mkdir(exist_ok=True)
        heat = render_heatmap(att, working)
        save_png(heat, budget_dir / "heatmap.png")
        save_png(seg.image, budget_dir / "segmented.png")
        rows.append({"maxEvaluations": count,
                     "roiPoints": [[r, c] for r, c in roi.points],
                     "roiDrift": drift, "maskIoU": iou,
                     "maskConfidence": seg.mask.confidence})
        panels.append(np.concatenate([heat.data, _to_rgb(seg.image).data], axis=0))

    separator = np.ones((panels[0].shape[0], 2, 3))
    strips = []
    for i, panel in enumerate(panels):
        if i:
            strips.append(separator)
        strips.append(panel)
    save_png(Image(np.concatenate(strips, axis=1)), out_dir / "grid.png")

    table = {"referenceKind": reference_kind,
             "referenceRoi": [[r, c] for r, c in ref_roi.points],
             "rows": rows, "seed": int(seed)}
    _write_canonical_json(out_dir / "ablation.json", table)
    return table


def _to_rgb(image: Image) -> Image:
    if image.channels == 3:
        return image
    return Image(np.repeat(image.data, 3, axis=2))
