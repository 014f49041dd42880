"""Shim configuration: mock mode serves canned fixtures, real mode wraps
actual models."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


class ShimConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ShimConfig:
    mode: str = "mock"
    fixture_dir: str | None = None
    classifier_model: str | None = None
    segmenter_model: str | None = None
    captioner_model: str | None = None
    device: str = "cpu"

    def __post_init__(self):
        if self.mode not in ("mock", "real"):
            raise ShimConfigError(f"unknown mode {self.mode!r}")
        if self.mode == "mock":
            if not self.fixture_dir:
                raise ShimConfigError("mock mode requires a fixture directory")
            if not Path(self.fixture_dir).is_dir():
                raise ShimConfigError(
                    f"fixture directory {self.fixture_dir!r} does not exist")
        else:
            missing = [name for name, value in (
                ("classifier", self.classifier_model),
                ("segmenter", self.segmenter_model),
                ("captioner", self.captioner_model)) if not value]
            if missing:
                raise ShimConfigError(
                    f"real mode requires model identifiers for: {missing}")

    @classmethod
    def from_file(cls, path) -> "ShimConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ShimConfigError(f"cannot read config {path}: {exc}") from exc
        return cls(
            mode=data.get("mode", "mock"),
            fixture_dir=data.get("fixtureDir"),
            classifier_model=data.get("classifierModel"),
            segmenter_model=data.get("segmenterModel"),
            captioner_model=data.get("captionerModel"),
            device=data.get("device", "cpu"))

    def model_identifiers(self) -> dict:
        return {"classifier": self.classifier_model,
                "segmenter": self.segmenter_model,
                "captioner": self.captioner_model}
