"""Decision tree forest: bootstrap trees with Gini splits on random feature subsets."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import LearnerSpec, TrainedModel, check_xy, register

N_TREES = 100


@dataclass
class Tree:
    """Flat tree. ``feature[i] == -1`` marks a leaf; ``value`` is the leaf's faulty fraction."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @classmethod
    def leaf(cls, value: float) -> "Tree":
        return cls(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]), np.array([float(value)]))

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def leaf_value(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=int)
        active = self.feature[node] >= 0
        while active.any():
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return self.value[node]

    def vote(self, X: np.ndarray) -> np.ndarray:
        return (self.leaf_value(X) >= 0.5).astype(int)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=int),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=int),
            np.asarray(d["right"], dtype=int),
            np.asarray(d["value"], dtype=float),
        )


def best_split(X: np.ndarray, y: np.ndarray, feats: np.ndarray):
    """Lowest weighted-Gini split over ``feats``; None when every feature is constant here."""
    n = len(y)
    Xs = X[:, feats]
    order = np.argsort(Xs, axis=0, kind="stable")
    vals = np.take_along_axis(Xs, order, axis=0)
    ys = y[order]
    pos_left = np.cumsum(ys, axis=0)[:-1]
    n_left = np.arange(1, n)[:, None]
    n_right = n - n_left
    pos_right = ys.sum(axis=0)[None, :] - pos_left
    # sum of per-child p(1-p)*size; proportional to weighted Gini
    cost = pos_left * (n_left - pos_left) / n_left + pos_right * (n_right - pos_right) / n_right
    valid = vals[1:] > vals[:-1]
    if not valid.any():
        return None
    cost = np.where(valid, cost, np.inf)
    flat = int(np.argmin(cost.T))  # feature-major so ties go to the earlier feature
    j, i = divmod(flat, n - 1)
    thr = 0.5 * (vals[i, j] + vals[i + 1, j])
    if not thr < vals[i + 1, j]:
        thr = vals[i, j]
    return int(feats[j]), float(thr)


def build_tree(
    X: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator,
    max_features: int | None = None,
    min_samples_split: int = 2,
    max_depth: int | None = None,
) -> Tree:
    p = X.shape[1]
    m = p if max_features is None else max(1, min(max_features, p))
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[idx].mean()))
        return len(feature) - 1

    stack = [(new_node(np.arange(len(y))), np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        ys = y[idx]
        if len(idx) < min_samples_split or ys.min() == ys.max():
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        perm = rng.permutation(p)
        split = best_split(X[idx], ys, perm[:m])
        if split is None and m < p:
            # sampled features all constant on this node; fall back to the rest
            split = best_split(X[idx], ys, perm[m:])
        if split is None:
            continue
        f, t = split
        mask = X[idx, f] <= t
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = f, t
        ln, rn = new_node(li), new_node(ri)
        left[node], right[node] = ln, rn
        stack.append((rn, ri, depth + 1))
        stack.append((ln, li, depth + 1))

    return Tree(
        np.asarray(feature, dtype=int),
        np.asarray(threshold, dtype=float),
        np.asarray(left, dtype=int),
        np.asarray(right, dtype=int),
        np.asarray(value, dtype=float),
    )


@register
class ForestModel(TrainedModel):
    kind = "DTF"

    def __init__(self, trees: list[Tree], hyperparams=None):
        self.trees = list(trees)
        self.hyperparams = hyperparams or {}
        self.training_score = {}

    def predict_score(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        votes = np.zeros(len(X))
        for t in self.trees:
            votes += t.vote(X)
        return votes / len(self.trees)

    def params(self):
        return {"trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_params(cls, doc):
        return cls([Tree.from_dict(t) for t in doc["params"]["trees"]])


def _max_features(setting, p: int) -> int | None:
    if setting is None or setting == "all":
        return None
    if setting == "sqrt":
        return math.ceil(math.sqrt(p))
    return int(setting)


def train_dtf(X, y, spec: LearnerSpec | None = None) -> ForestModel:
    X, y = check_xy(X, y)
    hp = dict(spec.hyperparams) if spec else {}
    seed = spec.seed if spec else 0
    n_trees = hp.get("n_trees", N_TREES)
    bootstrap = hp.get("bootstrap", True)
    mf = _max_features(hp.get("max_features", "sqrt"), X.shape[1])
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng([seed, t])
        idx = rng.integers(0, len(y), len(y)) if bootstrap else np.arange(len(y))
        trees.append(
            build_tree(
                X[idx], y[idx], rng, mf,
                min_samples_split=hp.get("min_samples_split", 2),
                max_depth=hp.get("max_depth"),
            )
        )
    model = ForestModel(trees, {**hp, "n_trees": n_trees, "bootstrap": bootstrap})
    model._set_training_score(X, y)
    return model
