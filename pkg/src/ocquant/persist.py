"""Versioned JSON documents for trained PAT and ODIn models."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Union

import numpy as np

from .errors import InvalidArgumentError
from .mixture import OdinModel, ScoreHistogram
from .scorer import MahalanobisModel
from .threshold import PatModel

FORMAT = "ocquant.model"
VERSION = 1

Model = Union[PatModel, OdinModel]


def config_hash(doc: dict) -> str:
    """Short SHA-256 of a canonical JSON rendering."""
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def _scorer_doc(m: MahalanobisModel) -> dict:
    return {
        "mean": m.mean.tolist(),
        "inverse_covariance": m.inverse_covariance.tolist(),
        "regularization": m.regularization,
    }


def _scorer_from(doc: dict) -> MahalanobisModel:
    return MahalanobisModel(
        np.asarray(doc["mean"], dtype=float),
        np.asarray(doc["inverse_covariance"], dtype=float),
        float(doc["regularization"]),
    )


def training_config(model: Model) -> dict:
    if isinstance(model, PatModel):
        return {"kind": "pat", "grid": model.grid.tolist(), "k": model.k, "seed": model.seed}
    return {"kind": "odin", "bins": model.bins, "d": model.d, "k": model.k,
            "seed": model.seed, "splits": model.splits}


def model_to_dict(model: Model) -> dict:
    cfg = training_config(model)
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "kind": cfg["kind"],
        "config": cfg,
        "config_hash": config_hash(cfg),
        "scorer": _scorer_doc(model.scorer),
    }
    if isinstance(model, PatModel):
        doc["thresholds"] = model.thresholds.tolist()
        doc["positive_scores"] = model.positive_scores.tolist()
    else:
        doc["thresholds"] = model.h_plus.thresholds.tolist()
        doc["masses"] = model.h_plus.masses.tolist()
        doc["limit"] = model.limit
        doc["overflow_mean"] = model.overflow_mean
        doc["overflow_std"] = model.overflow_std
    return doc


def model_from_dict(doc: dict) -> Model:
    if doc.get("format") != FORMAT:
        raise InvalidArgumentError("not an ocquant model document")
    if doc.get("version") != VERSION:
        raise InvalidArgumentError(f"unsupported model version {doc.get('version')}")
    cfg = doc["config"]
    scorer = _scorer_from(doc["scorer"])
    if doc["kind"] == "pat":
        return PatModel(
            scorer,
            np.asarray(cfg["grid"], dtype=float),
            np.asarray(doc["thresholds"], dtype=float),
            np.asarray(doc["positive_scores"], dtype=float),
            int(cfg["k"]),
            int(cfg["seed"]),
        )
    if doc["kind"] == "odin":
        hist = ScoreHistogram(np.asarray(doc["thresholds"], dtype=float), np.asarray(doc["masses"], dtype=float))
        return OdinModel(
            scorer, hist, float(doc["limit"]), int(cfg["bins"]), float(cfg["d"]),
            float(doc["overflow_mean"]), float(doc["overflow_std"]),
            int(cfg["k"]), int(cfg["seed"]), int(cfg["splits"]),
        )
    raise InvalidArgumentError(f"unknown model kind {doc['kind']!r}")


def save_model(model: Model, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> Model:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
