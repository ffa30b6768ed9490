"""Single-file JSON model bundle: fitted preprocessing, trained StackNet, provenance."""

from __future__ import annotations

import datetime as _dt
import json
import os
from dataclasses import dataclass

import numpy as np

from .preprocess import FittedPipeline, transform
from .stacknet import TrainedStackNet, predict_stacknet

BUNDLE_VERSION = 1


class BundleError(ValueError):
    pass


@dataclass
class ModelBundle:
    pipeline: FittedPipeline
    stacknet: TrainedStackNet
    provenance: dict
    format_version: int = BUNDLE_VERSION

    @property
    def feature_names(self) -> tuple:
        return tuple(self.provenance["feature_names"])

    def predict(self, matrix) -> np.ndarray:
        """Predictions for a raw feature matrix in ``feature_names`` column order."""
        return predict_stacknet(self.stacknet, transform(self.pipeline, matrix))

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "pipeline": self.pipeline.to_dict(),
            "stacknet": self.stacknet.to_dict(),
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ModelBundle:
        if d.get("format_version") != BUNDLE_VERSION:
            raise BundleError(f"unsupported bundle version {d.get('format_version')!r}")
        try:
            return cls(
                pipeline=FittedPipeline.from_dict(d["pipeline"]),
                stacknet=TrainedStackNet.from_dict(d["stacknet"]),
                provenance=dict(d["provenance"]),
            )
        except (KeyError, TypeError) as exc:
            raise BundleError(f"malformed bundle: {exc}") from exc


def make_provenance(seed, config_digest, feature_names, target_name=None, **extra) -> dict:
    return {
        "seed": int(seed),
        "config_digest": config_digest,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "feature_names": list(feature_names),
        "target_name": target_name,
        **extra,
    }


def save_bundle(bundle: ModelBundle, path) -> None:
    # repr-based float encoding in json round-trips every double exactly
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        json.dump(bundle.to_dict(), fh, sort_keys=True, separators=(",", ":"), allow_nan=False)
        fh.write("\n")


def load_bundle(path) -> ModelBundle:
    with open(os.fspath(path), encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise BundleError(f"bundle is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise BundleError("bundle must be a JSON object")
    return ModelBundle.from_dict(data)
