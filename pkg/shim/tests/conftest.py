import base64
import io

import numpy as np
import pytest
from PIL import Image as PilImage

from vale_shim.config import ShimConfig
from vale_shim.fixtures import build_fixture_set, write_fixture_dir


def synthetic_eagle_png(path):
    """Bright bird-ish shape on a dark gradient, 96x96 RGB."""
    n = 96
    rows, cols = np.indices((n, n), dtype=np.float64)
    sky = 60 + (60 * rows / (n - 1))
    arr = np.stack([sky * 0.5, sky * 0.7, sky], axis=2)
    body = ((rows - 52) / 16) ** 2 + ((cols - 48) / 9) ** 2 <= 1.0
    wings = ((rows - 48) / 6) ** 2 + ((cols - 48) / 34) ** 2 <= 1.0
    head = ((rows - 32) / 7) ** 2 + ((cols - 48) / 6) ** 2 <= 1.0
    bird = body | wings | head
    arr[bird] = [235, 225, 205]
    PilImage.fromarray(arr.astype(np.uint8), mode="RGB").save(path)
    return path


@pytest.fixture
def eagle_png(tmp_path):
    return synthetic_eagle_png(tmp_path / "eagle.png")


@pytest.fixture
def fixture_dir(tmp_path, eagle_png):
    entries = build_fixture_set(eagle_png)
    write_fixture_dir(entries, tmp_path / "fixtures")
    return tmp_path / "fixtures"


@pytest.fixture
def mock_config(fixture_dir):
    return ShimConfig(mode="mock", fixture_dir=str(fixture_dir))


@pytest.fixture
def mock_client(mock_config):
    from fastapi.testclient import TestClient

    from vale_shim.app import create_app

    with TestClient(create_app(mock_config)) as client:
        yield client


def png_b64(path) -> str:
    return base64.b64encode(open(path, "rb").read()).decode("ascii")


def decode_mask(b64: str) -> np.ndarray:
    pil = PilImage.open(io.BytesIO(base64.b64decode(b64)))
    return np.asarray(pil.convert("L")) > 0
