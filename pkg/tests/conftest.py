import numpy as np
import pytest

from vale.image import Image, save_png
from vale.pipeline import PipelineConfig


def build_toy_config(**overrides):
    """Fast, fully in-process pipeline config for tests."""
    base = {
        "predictor": {"kind": "toy-patch", "window": [16, 16, 32, 32],
                      "gain": 6.0, "offset": 0.3},
        "inputSize": [32, 32],
        "partition": {"mode": "grid", "rows": 2, "cols": 2},
        "masking": {"mode": "mean-fill"},
        "estimator": {"maxEvaluations": 64, "batchSize": 16,
                      "sampler": "exact", "seed": 11},
        "roiK": 1,
        "segmenter": {"source": "builtin", "tolerance": 0.2},
        "promptId": "default-imagenet",
        "caption": {},
        "services": {"mode": "mock", "fixture": "bald-eagle"},
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            base[key] = {**base[key], **value}
        else:
            base[key] = value
    return PipelineConfig.from_dict(base)


@pytest.fixture
def toy_config():
    return build_toy_config()


@pytest.fixture
def block_png(tmp_path):
    """32x32 test image: bright block inside the detector window (region 3
    of the 2x2 grid)."""
    arr = np.full((32, 32, 1), 0.05)
    arr[18:28, 18:28] = 0.95
    path = tmp_path / "block.png"
    save_png(Image(arr), path)
    return path


@pytest.fixture
def zero_png(tmp_path):
    path = tmp_path / "zeros.png"
    save_png(Image(np.zeros((32, 32, 1))), path)
    return path
