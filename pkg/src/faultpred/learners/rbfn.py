"""Gaussian RBF networks; variants differ only in how the centers are picked."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import expit

from .ann import EPOCHS, INNER_FOLDS
from .base import LearnerSpec, TrainedModel, TrainingError, check_xy, derive_seed, register
from .clustering import CenterSet, fuzzy_cmeans, kmeans, sq_dists, spread_widths

VARIANTS = ("RAN", "KMC", "FCM")
MAX_CENTERS = 30
# basis activations are small and mostly positive; the output layer needs larger steps than the ANN
ALPHA_GRID = (20.0, 5.0, 1.0, 0.5)


def default_k(n: int) -> int:
    return min(max(2, math.ceil(math.sqrt(n))), MAX_CENTERS, n)


def basis(X: np.ndarray, centers: np.ndarray, widths: np.ndarray) -> np.ndarray:
    return np.exp(-sq_dists(X, centers) / (2.0 * widths**2))


def random_centers(X: np.ndarray, k: int, seed: int) -> CenterSet:
    if k > len(X):
        raise ValueError(f"k={k} exceeds the number of records ({len(X)})")
    idx = np.random.default_rng(seed).choice(len(X), size=k, replace=False)
    C = X[np.sort(idx)].copy()
    return CenterSet(C, spread_widths(C, X))


def fit_output_layer(Phi, y, alpha, epochs):
    """GD on MSE of sigmoid(Phi @ w + b); returns (w, b, final loss)."""
    n, k = Phi.shape
    w = np.zeros(k)
    b = 0.0
    for _ in range(epochs):
        o = expit(Phi @ w + b)
        dz = (2.0 / n) * (o - y) * o * (1 - o)
        w = w - alpha * (Phi.T @ dz)
        b = b - alpha * dz.sum()
    loss = float(np.mean((expit(Phi @ w + b) - y) ** 2))
    return w, b, loss


def _choose_alpha(Phi, y, grid, epochs, seed):
    from ..evaluation import stratified_fold_indices

    k = min(INNER_FOLDS, int(np.bincount(y, minlength=2).min()))
    if k < 2:
        return grid[0]
    folds = stratified_fold_indices(y, k, derive_seed(seed, "alpha-cv"))
    yf = y.astype(float)
    best, best_loss = None, np.inf
    for alpha in grid:
        losses = []
        for f in folds:
            train = np.setdiff1d(np.arange(len(y)), f)
            w, b, loss = fit_output_layer(Phi[train], yf[train], alpha, epochs)
            if not np.isfinite(loss):
                break
            losses.append(float(np.mean((expit(Phi[f] @ w + b) - yf[f]) ** 2)))
        else:
            m = float(np.mean(losses))
            if m < best_loss:
                best, best_loss = alpha, m
    if best is None:
        raise TrainingError("RBFN output layer diverged for every learning constant")
    return best


class RBFNModel(TrainedModel):
    variant = ""

    def __init__(self, centers, widths, w, b, hyperparams=None):
        self.centers = np.asarray(centers, dtype=float)
        self.widths = np.asarray(widths, dtype=float)
        self.w = np.asarray(w, dtype=float)
        self.b = float(b)
        self.hyperparams = hyperparams or {}
        self.training_score = {}

    def predict_score(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        return expit(basis(X, self.centers, self.widths) @ self.w + self.b)

    def params(self):
        return {
            "centers": self.centers.tolist(),
            "widths": self.widths.tolist(),
            "w": self.w.tolist(),
            "b": self.b,
        }

    @classmethod
    def from_params(cls, doc):
        p = doc["params"]
        return cls(p["centers"], p["widths"], p["w"], p["b"])


@register
class RBFNRandom(RBFNModel):
    kind = "RBFN_RAN"
    variant = "RAN"


@register
class RBFNKMeans(RBFNModel):
    kind = "RBFN_KMC"
    variant = "KMC"


@register
class RBFNFuzzy(RBFNModel):
    kind = "RBFN_FCM"
    variant = "FCM"


_CLASSES = {"RAN": RBFNRandom, "KMC": RBFNKMeans, "FCM": RBFNFuzzy}


def train_rbfn(X, y, spec: LearnerSpec | None = None, variant: str | None = None) -> RBFNModel:
    X, y = check_xy(X, y)
    hp = dict(spec.hyperparams) if spec else {}
    seed = spec.seed if spec else 0
    if variant is None:
        variant = spec.kind.split("_", 1)[1] if spec else "KMC"
    if variant not in VARIANTS:
        raise ValueError(f"unknown RBFN variant {variant!r}")
    n = len(X)
    k = hp.get("k", default_k(n))
    if k > n:
        raise ValueError(f"k={k} exceeds the number of records ({n})")
    center_seed = derive_seed(seed, "centers")
    if variant == "RAN":
        cs = random_centers(X, k, center_seed)
    elif variant == "KMC":
        cs = kmeans(X, k, center_seed)
    else:
        cs = fuzzy_cmeans(X, k, m=hp.get("m", 2.0), seed=center_seed)
    widths = np.full(cs.k, float(hp["sigma"])) if "sigma" in hp else cs.widths

    Phi = basis(X, cs.centers, widths)
    epochs = hp.get("epochs", EPOCHS)
    grid = tuple(sorted(hp.get("alpha_grid", ALPHA_GRID), reverse=True))
    alpha = hp["alpha"] if "alpha" in hp else _choose_alpha(Phi, y, grid, epochs, seed)
    w, b, loss = fit_output_layer(Phi, y.astype(float), alpha, epochs)
    if not np.isfinite(loss):
        raise TrainingError("RBFN output layer diverged")

    model = _CLASSES[variant](cs.centers, widths, w, b, {**hp, "k": k, "epochs": epochs, "alpha": alpha})
    model._set_training_score(X, y)
    return model
