import json

import numpy as np
import pytest

from vale.errors import TransportError
from vale.fixtures import (BALD_EAGLE_LABELS, bald_eagle_image,
                           bald_eagle_masks)
from vale.gateway import validate_prediction_payload
from vale.image import Image, digest, to_base64_png
from vale.mockservices import MockTransport, bald_eagle_services, build_bundle
from vale.segment import validate_segment_payload


@pytest.fixture(scope="module")
def services():
    return bald_eagle_services()


@pytest.fixture(scope="module")
def eagle():
    return bald_eagle_image()


def test_eagle_image_is_reproducible(eagle):
    assert (eagle.height, eagle.width, eagle.channels) == (224, 224, 3)
    assert digest(eagle) == digest(bald_eagle_image())


def test_predict_fixture_returns_certain_class(services, eagle):
    body = services.handle("/predict", {"image": to_base64_png(eagle)})
    pred = validate_prediction_payload(body)
    assert pred.labels == BALD_EAGLE_LABELS
    assert pred.probabilities[0] == 1.0


def test_predict_fallback_tracks_window_brightness(services, eagle):
    darker = Image(eagle.data * 0.5)
    body = services.handle("/predict", {"image": to_base64_png(darker)})
    pred = validate_prediction_payload(body)
    assert pred.probabilities[0] < 1.0
    again = services.handle("/predict", {"image": to_base64_png(darker)})
    assert body == again


def test_segment_fixture_best_confidence(services, eagle):
    body = services.handle("/segment", {
        "image": to_base64_png(eagle), "points": [[100, 112]], "labels": [1]})
    candidates = validate_segment_payload(body, eagle)
    assert len(candidates) == 3
    assert max(c.confidence for c in candidates) == 0.932
    small, exact, large = bald_eagle_masks(eagle)
    assert np.array_equal(candidates[1].mask, exact)


def test_caption_fixture_and_fallback(services, eagle):
    _, exact, _ = bald_eagle_masks(eagle)
    segmented = Image(eagle.data * exact[:, :, np.newaxis])
    fixture = services.handle("/caption", {
        "image": to_base64_png(segmented),
        "prompt": "Explain the object in the image: 'bald_eagle'?"})
    assert "bald eagle" in fixture["text"]
    assert fixture["model"] == "mock-captioner"

    fallback = services.handle("/caption", {
        "image": to_base64_png(segmented), "prompt": "Anything else?"})
    assert fallback["text"].startswith("Deterministic mock caption")


def test_unknown_endpoint_and_bundle():
    services = bald_eagle_services()
    with pytest.raises(TransportError):
        services.handle("/nope", {})
    with pytest.raises(TransportError):
        build_bundle("missing-bundle")


def test_mock_transport_routes_by_path(services, eagle):
    transport = MockTransport(services)
    body = transport.post_json("http://mock.local/predict",
                               {"image": to_base64_png(eagle)})
    assert body["probabilities"][0] == 1.0


def test_mock_responses_are_deterministic_bytes(services, eagle):
    payload = {"image": to_base64_png(eagle)}
    a = json.dumps(services.handle("/predict", payload), sort_keys=True)
    b = json.dumps(services.handle("/predict", payload), sort_keys=True)
    assert a == b
