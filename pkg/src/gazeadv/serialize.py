"""Versioned JSON serialization for trained models.

Every file carries ``format_version`` and ``model_type``; floats are
written via their shortest round-tripping representation, so a
save/load/save cycle is bit-exact.
"""
from __future__ import annotations

import json

import numpy as np

from .forest import DecisionTree, RandomForestModel
from .svm import PairClassifier, SvmRbfModel

FORMAT_VERSION = 1


def _array(values):
    return np.asarray(values, dtype=float)


def save_model(path, model) -> None:
    if isinstance(model, SvmRbfModel):
        payload = {
            "format_version": FORMAT_VERSION,
            "model_type": "svm_rbf",
            "classes": list(model.classes),
            "gamma": model.gamma,
            "C": model.C,
            "n_features": model.n_features,
            "feature_mean": None
            if model.feature_mean is None
            else model.feature_mean.tolist(),
            "feature_scale": None
            if model.feature_scale is None
            else model.feature_scale.tolist(),
            "pairs": [
                {
                    "class_a": p.class_a,
                    "class_b": p.class_b,
                    "support_vectors": p.support_vectors.tolist(),
                    "dual_coef": p.dual_coef.tolist(),
                    "intercept": p.intercept,
                }
                for p in model.pairs
            ],
        }
    elif isinstance(model, RandomForestModel):
        payload = {
            "format_version": FORMAT_VERSION,
            "model_type": "random_forest",
            "classes": list(model.classes),
            "n_features": model.n_features,
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "value": t.value.tolist(),
                }
                for t in model.trees
            ],
        }
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_model(path):
    with open(path) as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version!r}")
    kind = payload.get("model_type")
    if kind == "svm_rbf":
        return SvmRbfModel(
            classes=tuple(payload["classes"]),
            gamma=float(payload["gamma"]),
            C=float(payload["C"]),
            n_features=int(payload["n_features"]),
            pairs=tuple(
                PairClassifier(
                    class_a=p["class_a"],
                    class_b=p["class_b"],
                    support_vectors=_array(p["support_vectors"]).reshape(
                        len(p["dual_coef"]), int(payload["n_features"])
                    ),
                    dual_coef=_array(p["dual_coef"]),
                    intercept=float(p["intercept"]),
                )
                for p in payload["pairs"]
            ),
            feature_mean=None
            if payload.get("feature_mean") is None
            else _array(payload["feature_mean"]),
            feature_scale=None
            if payload.get("feature_scale") is None
            else _array(payload["feature_scale"]),
        )
    if kind == "random_forest":
        return RandomForestModel(
            classes=tuple(payload["classes"]),
            n_features=int(payload["n_features"]),
            trees=tuple(
                DecisionTree(
                    feature=np.asarray(t["feature"], dtype=np.int32),
                    threshold=_array(t["threshold"]),
                    left=np.asarray(t["left"], dtype=np.int32),
                    right=np.asarray(t["right"], dtype=np.int32),
                    value=_array(t["value"]),
                )
                for t in payload["trees"]
            ),
        )
    raise ValueError(f"{path}: unknown model type {kind!r}")
