"""FastAPI service exposing /predict, /segment, /caption, and /healthz.

Mock mode answers from a fixture store keyed by request digest and is
byte-deterministic; unknown digests get a 404 echoing the digest. Real mode
loads the configured model adapters at startup and fails fast if any of
them cannot load.
"""

from __future__ import annotations

import json

from fastapi import FastAPI, Request, Response

from .config import ShimConfig
from .fixtures import FixtureStore, validate_response
from .imaging import ImagePayloadError, caption_key, decode_png_base64, \
    digest_of_array


def _json_response(payload: dict, status_code: int = 200) -> Response:
    return Response(content=json.dumps(payload, sort_keys=True),
                    status_code=status_code, media_type="application/json")


def _error(status_code: int, message: str, **extra) -> Response:
    return _json_response({"error": message, **extra}, status_code)


def create_app(config: ShimConfig) -> FastAPI:
    app = FastAPI(title="vale-shim", docs_url=None, redoc_url=None)
    store = FixtureStore.load(config.fixture_dir) if config.mode == "mock" else None
    adapters = None
    if config.mode == "real":
        from . import adapters as adapters_mod

        adapters = adapters_mod.load_adapters(config)  # startup error on failure

    def mock_lookup(endpoint: str, digest: str) -> Response:
        response = store.lookup(endpoint, digest)
        if response is None:
            return _error(404, "unknown fixture", endpoint=endpoint,
                          digest=digest)
        return _json_response(response)

    @app.get("/healthz")
    def healthz():
        return _json_response({"mode": config.mode,
                               "models": config.model_identifiers()})

    @app.post("/predict")
    async def predict(request: Request):
        body, problem = await _read_json(request)
        if problem:
            return problem
        if not isinstance(body.get("image"), str):
            return _error(400, "'image' must be base64 PNG text")
        try:
            arr = decode_png_base64(body["image"])
        except ImagePayloadError as exc:
            return _error(400, str(exc))
        if config.mode == "mock":
            return mock_lookup("/predict", digest_of_array(arr))
        response = adapters.classifier(arr)
        validate_response("/predict", response)
        return _json_response(response)

    @app.post("/segment")
    async def segment(request: Request):
        body, problem = await _read_json(request)
        if problem:
            return problem
        if not isinstance(body.get("image"), str):
            return _error(400, "'image' must be base64 PNG text")
        points = body.get("points")
        labels = body.get("labels")
        if not isinstance(points, list) or not points or not all(
                isinstance(p, list) and len(p) == 2 for p in points):
            return _error(400, "'points' must be a non-empty [[row, col], ...]")
        if not isinstance(labels, list) or len(labels) != len(points):
            return _error(400, "'labels' must align with points")
        try:
            arr = decode_png_base64(body["image"])
        except ImagePayloadError as exc:
            return _error(400, str(exc))
        if config.mode == "mock":
            return mock_lookup("/segment", digest_of_array(arr))
        response = adapters.segmenter(arr, points, labels)
        validate_response("/segment", response)
        return _json_response(response)

    @app.post("/caption")
    async def caption(request: Request):
        body, problem = await _read_json(request)
        if problem:
            return problem
        if not isinstance(body.get("image"), str):
            return _error(400, "'image' must be base64 PNG text")
        if not isinstance(body.get("prompt"), str) or not body["prompt"]:
            return _error(400, "'prompt' must be non-empty text")
        try:
            arr = decode_png_base64(body["image"])
        except ImagePayloadError as exc:
            return _error(400, str(exc))
        if config.mode == "mock":
            key = caption_key(digest_of_array(arr), body["prompt"])
            return mock_lookup("/caption", key)
        response = adapters.captioner(
            arr, body["prompt"], float(body.get("temperature", 0.2)),
            int(body.get("max_tokens", 1024)))
        validate_response("/caption", response)
        return _json_response(response)

    return app


async def _read_json(request: Request):
    try:
        body = await request.json()
    except Exception:
        return None, _error(400, "request body must be JSON")
    if not isinstance(body, dict):
        return None, _error(400, "request body must be a JSON object")
    return body, None
