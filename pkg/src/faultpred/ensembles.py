"""Heterogeneous ensembles over the five base learners.

BTE delegates to the base with the best training F-measure, MVE takes the
majority of the five thresholded base labels, and NDTF stacks a decision tree
forest on the base scores.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .learners import BASE_KINDS, LearnerSpec, TrainedModel, derive_seed, model_from_dict, train
from .learners.base import _REGISTRY

RULES = ("BTE", "MVE", "NDTF")
BTE_CRITERION = "training f_measure, then training accuracy, then roster order"


@dataclass(frozen=True)
class EnsembleSpec:
    rule: str
    base_specs: tuple[LearnerSpec, ...]
    meta_spec: LearnerSpec | None = None
    seed: int = 0

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown ensemble rule {self.rule!r}")
        kinds = tuple(s.kind for s in self.base_specs)
        if sorted(kinds) != sorted(BASE_KINDS):
            raise ValueError(f"ensemble needs exactly one of each base kind {BASE_KINDS}, got {kinds}")
        if self.rule == "NDTF" and (self.meta_spec is None or self.meta_spec.kind != "DTF"):
            raise ValueError("NDTF needs a DTF meta_spec")


def default_spec(rule: str, seed: int = 0, hyperparams: dict | None = None) -> EnsembleSpec:
    hyperparams = hyperparams or {}
    bases = tuple(LearnerSpec(k, dict(hyperparams.get(k, {})), derive_seed(seed, k)) for k in BASE_KINDS)
    meta = LearnerSpec("DTF", dict(hyperparams.get("DTF", {})), derive_seed(seed, "meta")) if rule == "NDTF" else None
    return EnsembleSpec(rule, bases, meta, seed)


def majority_vote(labels) -> np.ndarray:
    """Column-wise majority of an (n_models, n_records) 0/1 array."""
    labels = np.asarray(labels, dtype=int)
    if labels.ndim == 1:
        labels = labels[:, None]
    if labels.shape[0] % 2 == 0:
        raise ValueError("majority voting needs an odd number of voters")
    return (2 * labels.sum(axis=0) > labels.shape[0]).astype(int)


def predict_mve(bases: Sequence[TrainedModel], x) -> int | np.ndarray:
    if len(bases) != 5:
        raise ValueError("MVE needs exactly 5 base models")
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    out = majority_vote([b.predict(X[None, :] if single else X) for b in bases])
    return int(out[0]) if single else out


def select_best(bases: Sequence[TrainedModel]) -> int:
    best = 0
    for i, b in enumerate(bases):
        key = (b.training_score["f_measure"], b.training_score["accuracy"])
        top = (bases[best].training_score["f_measure"], bases[best].training_score["accuracy"])
        if key > top:
            best = i
    return best


def meta_features(bases: Sequence[TrainedModel], X) -> np.ndarray:
    return np.column_stack([b.predict_score(X) for b in bases])


class EnsembleModel(TrainedModel):
    rule = ""

    def __init__(self, bases, chosen_index=None, meta_model=None):
        self.bases = list(bases)
        self.chosen_index = chosen_index
        self.meta_model = meta_model
        self.hyperparams = {}
        self.training_score = {}

    def base_scores(self, X) -> np.ndarray:
        return meta_features(self.bases, X)

    def score_from_base_scores(self, S: np.ndarray) -> np.ndarray:
        """Ensemble score given precomputed base scores (one column per base)."""
        raise NotImplementedError

    def predict_score(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        return self.score_from_base_scores(self.base_scores(X))

    def params(self):
        return {
            "bases": [b.to_dict() for b in self.bases],
            "chosen_index": self.chosen_index,
            "meta_model": self.meta_model.to_dict() if self.meta_model is not None else None,
        }

    @classmethod
    def from_params(cls, doc):
        p = doc["params"]
        meta = model_from_dict(p["meta_model"]) if p["meta_model"] else None
        return cls([model_from_dict(b) for b in p["bases"]], p["chosen_index"], meta)


class BTEModel(EnsembleModel):
    kind = rule = "BTE"

    def predict_score(self, X) -> np.ndarray:
        return self.bases[self.chosen_index].predict_score(X)

    def score_from_base_scores(self, S):
        return S[:, self.chosen_index]


class MVEModel(EnsembleModel):
    kind = rule = "MVE"

    def score_from_base_scores(self, S):
        # fraction of faulty votes; >= 0.5 exactly when the majority says faulty
        return (S >= 0.5).mean(axis=1)


class NDTFModel(EnsembleModel):
    kind = rule = "NDTF"

    def score_from_base_scores(self, S):
        return self.meta_model.predict_score(S)


for _cls in (BTEModel, MVEModel, NDTFModel):
    _REGISTRY[_cls.kind] = _cls


def combine(rule: str, bases: Sequence[TrainedModel], X, y, meta_spec: LearnerSpec | None = None) -> EnsembleModel:
    """Build an ensemble of already-trained bases on training data (X, y)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(bases) != 5:
        raise ValueError("heterogeneous ensembles use exactly 5 base models")
    if rule == "BTE":
        model = BTEModel(bases, chosen_index=select_best(bases))
        model.hyperparams = {"criterion": BTE_CRITERION}
    elif rule == "MVE":
        model = MVEModel(bases)
    elif rule == "NDTF":
        meta_spec = meta_spec or LearnerSpec("DTF")
        meta = train(meta_spec, meta_features(bases, X), y)
        model = NDTFModel(bases, meta_model=meta)
        model.hyperparams = {"meta_features": "base scores on the training split"}
    else:
        raise ValueError(f"unknown ensemble rule {rule!r}")
    model._set_training_score(X, y)
    return model


def train_bases(X, y, specs: Sequence[LearnerSpec]) -> list[TrainedModel]:
    return [train(s, X, y) for s in specs]


def train_ensemble(X, y, spec: EnsembleSpec) -> EnsembleModel:
    return combine(spec.rule, train_bases(X, y, spec.base_specs), X, y, spec.meta_spec)


def train_bte(X, y, spec: EnsembleSpec) -> EnsembleModel:
    return combine("BTE", train_bases(X, y, spec.base_specs), X, y, spec.meta_spec)


def train_mve(X, y, spec: EnsembleSpec) -> EnsembleModel:
    return combine("MVE", train_bases(X, y, spec.base_specs), X, y, spec.meta_spec)


def train_ndtf(X, y, spec: EnsembleSpec) -> EnsembleModel:
    return combine("NDTF", train_bases(X, y, spec.base_specs), X, y, spec.meta_spec)
