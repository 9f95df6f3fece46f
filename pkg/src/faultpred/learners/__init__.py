"""Base classifiers: LOGR, ANN, the three RBFN variants, and the DTF forest."""

from .ann import ANNModel, train_ann
from .base import (
    KINDS,
    LearnerSpec,
    TrainedModel,
    TrainingError,
    derive_seed,
    model_from_dict,
)
from .clustering import CenterSet, fuzzy_cmeans, kmeans
from .forest import ForestModel, Tree, train_dtf
from .logr import LogisticModel, fit_logistic, train_logr
from .rbfn import RBFNModel, train_rbfn

BASE_KINDS = ("LOGR", "ANN", "RBFN_RAN", "RBFN_KMC", "RBFN_FCM")

_TRAINERS = {
    "LOGR": train_logr,
    "ANN": train_ann,
    "RBFN_RAN": train_rbfn,
    "RBFN_KMC": train_rbfn,
    "RBFN_FCM": train_rbfn,
    "DTF": train_dtf,
}


def train(spec: LearnerSpec, X, y) -> TrainedModel:
    return _TRAINERS[spec.kind](X, y, spec)


__all__ = [
    "ANNModel", "BASE_KINDS", "CenterSet", "ForestModel", "KINDS", "LearnerSpec",
    "LogisticModel", "RBFNModel", "TrainedModel", "TrainingError", "Tree",
    "derive_seed", "fit_logistic", "fuzzy_cmeans", "kmeans", "model_from_dict",
    "train", "train_ann", "train_dtf", "train_logr", "train_rbfn",
]
