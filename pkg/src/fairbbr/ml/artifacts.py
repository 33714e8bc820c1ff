"""JSON model artifacts: a fitted model plus the scaler it was trained behind."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .mlp import MlpClassifier, MlpRegressor
from .preprocessing import Standardizer, standardize_apply
from .svm import LinearSvm
from .tree import DecisionTree

SCHEMA_VERSION = 1

KINDS = {
    "decision_tree": DecisionTree,
    "linear_svm": LinearSvm,
    "mlp_classifier": MlpClassifier,
    "mlp_regressor": MlpRegressor,
}


class ArtifactError(ValueError):
    pass


def kind_of(model) -> str:
    for kind, cls in KINDS.items():
        if type(model) is cls:
            return kind
    raise ArtifactError(f"no artifact kind for {type(model).__name__}")


@dataclass
class ModelArtifact:
    model: object
    scaler: Optional[Standardizer] = None
    hyperparameters: dict = field(default_factory=dict)
    scores: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)
    features: tuple = ("block_size", "throughput")

    @property
    def kind(self) -> str:
        return kind_of(self.model)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.scaler is not None:
            X = standardize_apply(self.scaler, X)
        return self.model.predict(X)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "features": list(self.features),
            "hyperparameters": self.hyperparameters,
            "scaler": self.scaler.to_dict() if self.scaler is not None else None,
            "model": self.model.to_dict(),
            "trace": [[int(e), float(v)] for e, v in self.trace],
            "scores": self.scores,
        }

    @classmethod
    def from_dict(cls, d) -> "ModelArtifact":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ArtifactError(f"unsupported schema_version {d.get('schema_version')!r}")
        kind = d.get("kind")
        if kind not in KINDS:
            raise ArtifactError(f"unknown model kind {kind!r}")
        scaler = Standardizer.from_dict(d["scaler"]) if d.get("scaler") else None
        return cls(
            model=KINDS[kind].from_dict(d["model"]),
            scaler=scaler,
            hyperparameters=d.get("hyperparameters", {}),
            scores=d.get("scores", {}),
            trace=[tuple(t) for t in d.get("trace", [])],
            features=tuple(d.get("features", ("block_size", "throughput"))),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ModelArtifact":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ArtifactError(f"{path}: line {exc.lineno}: {exc.msg}") from None
        return cls.from_dict(d)
