"""Confusion-matrix measures and the stratified k-fold cross-validation harness."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dataset_io import Dataset, apply_minmax, minmax_params
from .learners import BASE_KINDS, LearnerSpec, TrainedModel, derive_seed, train

log = logging.getLogger(__name__)

TECHNIQUES = ("LOGR", "ANN", "RBFN_RAN", "RBFN_KMC", "RBFN_FCM", "BTE", "MVE", "NDTF")
NORMALIZE_MODES = ("fold", "global")


class UndefinedMeasureError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn)

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


def confusion_matrix(y_true, y_pred) -> ConfusionMatrix:
    t = np.asarray(y_true, dtype=int)
    p = np.asarray(y_pred, dtype=int)
    return ConfusionMatrix(
        tp=int(np.sum((t == 1) & (p == 1))),
        fp=int(np.sum((t == 0) & (p == 1))),
        tn=int(np.sum((t == 0) & (p == 0))),
        fn=int(np.sum((t == 1) & (p == 0))),
    )


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise UndefinedMeasureError("accuracy of an empty confusion matrix")
    return (cm.tn + cm.tp) / cm.total


def f_measure(cm: ConfusionMatrix) -> float:
    """2TP / (2TP + FP + FN); 1.0 when there is nothing to find and nothing flagged."""
    denom = 2 * cm.tp + cm.fp + cm.fn
    if denom == 0:
        return 1.0
    return 2 * cm.tp / denom


# -- folds -------------------------------------------------------------------


@dataclass(frozen=True)
class FoldAssignment:
    folds: tuple[np.ndarray, ...]
    seed: int

    @property
    def k(self) -> int:
        return len(self.folds)

    def train_test(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        test = self.folds[i]
        train = np.sort(np.concatenate([f for j, f in enumerate(self.folds) if j != i]))
        return train, test


def stratified_fold_indices(y, k: int, seed: int) -> list[np.ndarray]:
    """Shuffle each class with a seeded RNG and deal round-robin into k folds.

    Faulty records are dealt first; the non-faulty deal continues where the
    faulty one stopped so fold sizes differ by at most one.
    """
    y = np.asarray(y, dtype=int)
    n = len(y)
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of records ({n})")
    rng = np.random.default_rng(seed)
    buckets: list[list[int]] = [[] for _ in range(k)]
    pos = 0
    for label in (1, 0):
        idx = np.flatnonzero(y == label)
        idx = idx[rng.permutation(len(idx))]
        for i in idx:
            buckets[pos % k].append(int(i))
            pos += 1
    return [np.sort(np.asarray(b, dtype=int)) for b in buckets]


def stratified_kfold(d: Dataset, k: int = 10, seed: int = 0) -> FoldAssignment:
    if d.n_faulty == 0 or d.n_faulty == len(d):
        raise ValueError("each class needs at least one record")
    return FoldAssignment(tuple(stratified_fold_indices(d.y, k, seed)), seed)


# -- reports -----------------------------------------------------------------


@dataclass
class FoldResult:
    index: int
    n_train: int
    n_test: int
    cm: ConfusionMatrix
    clamp_events: int = 0

    @property
    def accuracy(self) -> float:
        return accuracy(self.cm)

    @property
    def f_measure(self) -> float:
        return f_measure(self.cm)

    def to_dict(self) -> dict:
        return {
            "fold": self.index,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "confusion": self.cm.to_dict(),
            "accuracy": self.accuracy,
            "f_measure": self.f_measure,
            "clamp_events": self.clamp_events,
        }


@dataclass
class PerformanceReport:
    dataset: str
    technique: str
    metric_set: tuple[str, ...]
    seed: int
    k: int
    normalize: str = "fold"
    folds: list[FoldResult] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)

    @property
    def pooled(self) -> ConfusionMatrix:
        total = ConfusionMatrix()
        for f in self.folds:
            total = total + f.cm
        return total

    @property
    def accuracy(self) -> float:
        return accuracy(self.pooled)

    @property
    def f_measure(self) -> float:
        return f_measure(self.pooled)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([f.accuracy for f in self.folds]))

    @property
    def mean_f_measure(self) -> float:
        return float(np.mean([f.f_measure for f in self.folds]))

    @property
    def clamp_events(self) -> int:
        return sum(f.clamp_events for f in self.folds)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "technique": self.technique,
            "metric_set": list(self.metric_set),
            "seed": self.seed,
            "k": self.k,
            "normalize": self.normalize,
            "folds": [f.to_dict() for f in self.folds],
            "skipped_folds": self.skipped,
            "pooled": {
                "confusion": self.pooled.to_dict(),
                "accuracy": self.accuracy,
                "f_measure": self.f_measure,
            },
            "fold_mean": {"accuracy": self.mean_accuracy, "f_measure": self.mean_f_measure},
            "clamp_events": self.clamp_events,
        }


# -- cross validation ---------------------------------------------------------

Trainer = Callable[[np.ndarray, np.ndarray, int], TrainedModel]


def _fold_data(X, train_idx, test_idx, normalize):
    if normalize == "global":
        return X[train_idx], X[test_idx], 0
    lo, hi = minmax_params(X[train_idx])
    Xtr = apply_minmax(X[train_idx], lo, hi)
    raw = apply_minmax(X[test_idx], lo, hi)
    clamps = int(np.sum((raw < 0) | (raw > 1)))
    return Xtr, np.clip(raw, 0.0, 1.0), clamps


def _prepare(d: Dataset, metric_set, k, seed, normalize):
    if normalize not in NORMALIZE_MODES:
        raise ValueError(f"normalize must be one of {NORMALIZE_MODES}")
    metric_set = tuple(metric_set)
    unknown = set(metric_set) - set(d.metrics)
    if unknown or not metric_set:
        raise ValueError(f"metric set must be a non-empty subset of the catalog; unknown: {sorted(unknown)}")
    X = d.columns(metric_set)
    if normalize == "global":
        lo, hi = minmax_params(X)
        X = apply_minmax(X, lo, hi)
    return metric_set, X, stratified_kfold(d, k, derive_seed(seed, d.name, "folds"))


def cross_validate_techniques(
    techniques: Sequence[str],
    metric_set: Sequence[str],
    d: Dataset,
    k: int = 10,
    seed: int = 0,
    normalize: str = "fold",
    hyperparams: dict | None = None,
) -> dict[str, PerformanceReport]:
    """Cross-validate several techniques sharing one fold assignment.

    Within each fold the five base learners are trained once; every ensemble
    technique is assembled from those same base models. Base-learner seeds
    derive from (seed, dataset, base kind, fold), the NDTF meta-learner's from
    (seed, dataset, "NDTF", fold).
    """
    from .ensembles import combine

    hyperparams = hyperparams or {}
    for t in techniques:
        if t not in TECHNIQUES:
            raise ValueError(f"unknown technique {t!r}")
    metric_set, X, folds = _prepare(d, metric_set, k, seed, normalize)
    reports = {t: PerformanceReport(d.name, t, metric_set, seed, k, normalize) for t in techniques}
    ensembles = [t for t in techniques if t in ("BTE", "MVE", "NDTF")]
    needed = list(BASE_KINDS) if ensembles else [t for t in BASE_KINDS if t in techniques]

    for i in range(folds.k):
        train_idx, test_idx = folds.train_test(i)
        ytr, yte = d.y[train_idx], d.y[test_idx]
        if ytr.min() == ytr.max():
            reason = {"fold": i, "reason": "training split has a single class", "n_test": len(test_idx)}
            log.warning("%s fold %d skipped: %s", d.name, i, reason["reason"])
            for r in reports.values():
                r.skipped.append(reason)
            continue
        Xtr, Xte, clamps = _fold_data(X, train_idx, test_idx, normalize)
        bases = {
            kind: train(
                LearnerSpec(kind, dict(hyperparams.get(kind, {})), derive_seed(seed, d.name, kind, i)),
                Xtr, ytr,
            )
            for kind in needed
        }
        for t in techniques:
            if t in bases:
                model = bases[t]
            else:
                meta = LearnerSpec("DTF", dict(hyperparams.get("DTF", {})), derive_seed(seed, d.name, t, i))
                model = combine(t, [bases[b] for b in BASE_KINDS], Xtr, ytr, meta)
            cm = confusion_matrix(yte, model.predict(Xte))
            reports[t].folds.append(FoldResult(i, len(train_idx), len(test_idx), cm, clamps))
    return reports


def cross_validate(
    model_spec,
    metric_set: Sequence[str],
    d: Dataset,
    k: int = 10,
    seed: int = 0,
    normalize: str = "fold",
) -> PerformanceReport:
    """Cross-validate one model.

    ``model_spec`` is a technique name, a ``LearnerSpec``, an ``EnsembleSpec``
    (its base hyperparameters are honoured; seeds are re-derived per fold), or
    any callable ``(X_train, y_train, seed) -> model`` exposing ``predict``.
    """
    from .ensembles import EnsembleSpec

    if isinstance(model_spec, str):
        return cross_validate_techniques([model_spec], metric_set, d, k, seed, normalize)[model_spec]
    if isinstance(model_spec, LearnerSpec) and model_spec.kind in BASE_KINDS:
        hp = {model_spec.kind: model_spec.hyperparams}
        return cross_validate_techniques([model_spec.kind], metric_set, d, k, seed, normalize, hp)[model_spec.kind]
    if isinstance(model_spec, EnsembleSpec):
        hp = {s.kind: s.hyperparams for s in model_spec.base_specs}
        if model_spec.meta_spec is not None:
            hp["DTF"] = model_spec.meta_spec.hyperparams
        return cross_validate_techniques([model_spec.rule], metric_set, d, k, seed, normalize, hp)[model_spec.rule]

    if isinstance(model_spec, LearnerSpec):
        name = model_spec.kind
        spec = model_spec

        def fit(X, y, s):
            return train(spec.with_seed(s), X, y)
    elif callable(model_spec):
        name = getattr(model_spec, "__name__", "custom")
        fit = model_spec
    else:
        raise TypeError(f"unsupported model spec {model_spec!r}")

    metric_set, X, folds = _prepare(d, metric_set, k, seed, normalize)
    report = PerformanceReport(d.name, name, metric_set, seed, k, normalize)
    for i in range(folds.k):
        train_idx, test_idx = folds.train_test(i)
        ytr, yte = d.y[train_idx], d.y[test_idx]
        if ytr.min() == ytr.max():
            log.warning("%s fold %d skipped: training split has a single class", d.name, i)
            report.skipped.append({"fold": i, "reason": "training split has a single class", "n_test": len(test_idx)})
            continue
        Xtr, Xte, clamps = _fold_data(X, train_idx, test_idx, normalize)
        model = fit(Xtr, ytr, derive_seed(seed, d.name, name, i))
        cm = confusion_matrix(yte, model.predict(Xte))
        report.folds.append(FoldResult(i, len(train_idx), len(test_idx), cm, clamps))
    return report
