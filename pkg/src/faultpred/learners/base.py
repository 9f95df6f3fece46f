from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any, ClassVar

import numpy as np

FORMAT_VERSION = 1
THRESHOLD = 0.5

KINDS = ("LOGR", "ANN", "RBFN_RAN", "RBFN_KMC", "RBFN_FCM", "DTF")


class TrainingError(RuntimeError):
    pass


def derive_seed(*parts: Any) -> int:
    """Stable 63-bit seed from arbitrary parts (order matters)."""
    h = hashlib.blake2b("|".join(str(p) for p in parts).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "big") >> 1


@dataclass(frozen=True)
class LearnerSpec:
    kind: str
    hyperparams: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown learner kind {self.kind!r}")

    def with_seed(self, seed: int) -> "LearnerSpec":
        return LearnerSpec(self.kind, dict(self.hyperparams), seed)


def check_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=int)
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y length mismatch")
    if X.shape[0] < 2 or y.min() == y.max():
        raise ValueError("training needs at least 2 records and both classes")
    return X, y


class TrainedModel:
    """Uniform predict contract: ``predict_score`` in [0, 1], ``predict`` = score >= 0.5."""

    kind: ClassVar[str] = ""
    training_score: dict

    def predict_score(self, X) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X) -> np.ndarray:
        return (self.predict_score(X) >= THRESHOLD).astype(int)

    def _set_training_score(self, X, y):
        from ..evaluation import accuracy, confusion_matrix, f_measure

        cm = confusion_matrix(y, self.predict(X))
        self.training_score = {"accuracy": accuracy(cm), "f_measure": f_measure(cm)}

    def params(self) -> dict:
        raise NotImplementedError

    @classmethod
    def from_params(cls, doc: dict) -> "TrainedModel":
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": self.kind,
            "hyperparams": getattr(self, "hyperparams", {}),
            "training_score": getattr(self, "training_score", {}),
            "params": self.params(),
        }


_REGISTRY: dict[str, type[TrainedModel]] = {}


def register(cls):
    _REGISTRY[cls.kind] = cls
    return cls


def model_from_dict(doc: dict) -> TrainedModel:
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format {doc.get('format_version')!r}")
    cls = _REGISTRY[doc["kind"]]
    m = cls.from_params(doc)
    m.hyperparams = doc.get("hyperparams", {})
    m.training_score = doc.get("training_score", {})
    return m
