"""Walkthrough: the complete explanation pipeline on the bundled sample.

Exports the procedural bald-eagle image, then runs classify -> attribute ->
ROI -> segment -> prompt -> caption against the bundled deterministic mock
services. The record, heatmap, ROI overlay, mask, and segmented object all
land in demos/output/eagle/.
"""

import json
import pathlib

from vale import PipelineConfig, explain
from vale.fixtures import save_bald_eagle_png

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)
image_path = OUT / "bald_eagle.png"
save_bald_eagle_png(image_path)

config = PipelineConfig.from_dict({
    "segmenter": {"source": "remote"},      # served by the mock bundle
    "services": {"mode": "mock", "fixture": "bald-eagle"},
})

record = explain(config, image_path, OUT / "eagle", seed=7)
print(f"prediction: {record.prediction['label']} "
      f"(p={record.prediction['probability']:.2f})")
print(f"attribution over {record.attribution['regionCount']} regions; "
      f"top region value {record.attribution['topRegions'][0]['value']:+.4f}")
print(f"ROI point: {record.roi['points'][0]}")
print(f"mask confidence: {record.mask['confidence']}")
print(f"prompt: {record.prompt['text']}")
print(f"caption: {record.caption['text'][:88]}...")
print(f"\nstage timings (ms): "
      f"{json.dumps({k: round(v, 1) for k, v in record.stage_millis.items()})}")
print(f"artifacts in {OUT / 'eagle'}")
