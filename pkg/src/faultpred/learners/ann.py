"""One-hidden-layer sigmoid network trained by full-batch gradient descent on MSE."""

from __future__ import annotations

import logging

import numpy as np
from scipy.special import expit

from .base import LearnerSpec, TrainedModel, TrainingError, check_xy, derive_seed, register

log = logging.getLogger(__name__)

ALPHA_GRID = (0.5, 0.1, 0.05, 0.01)
EPOCHS = 500
INNER_FOLDS = 3


def hidden_units(p: int) -> int:
    return min(2 * p + 1, 20)


def init_params(p: int, h: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    r1 = np.sqrt(6.0 / (p + h))
    r2 = np.sqrt(6.0 / (h + 1))
    return {
        "W1": rng.uniform(-r1, r1, size=(p, h)),
        "b1": np.zeros(h),
        "w2": rng.uniform(-r2, r2, size=h),
        "b2": np.zeros(1),
    }


def forward(params, X):
    H = expit(X @ params["W1"] + params["b1"])
    o = expit(H @ params["w2"] + params["b2"][0])
    return H, o


def mse(params, X, y) -> float:
    _, o = forward(params, X)
    return float(np.mean((o - y) ** 2))


def loss_and_grad(params, X, y) -> tuple[float, dict[str, np.ndarray]]:
    H, o = forward(params, X)
    n = len(y)
    err = o - y
    loss = float(np.mean(err**2))
    dz2 = (2.0 / n) * err * o * (1 - o)
    dz1 = np.outer(dz2, params["w2"]) * H * (1 - H)
    grads = {
        "W1": X.T @ dz1,
        "b1": dz1.sum(axis=0),
        "w2": H.T @ dz2,
        "b2": np.array([dz2.sum()]),
    }
    return loss, grads


def gradient_descent(params, X, y, alpha: float, epochs: int) -> tuple[dict, float]:
    """Plain GD: W <- W - alpha * dMSE/dW. Returns final params and loss."""
    params = {k: v.copy() for k, v in params.items()}
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(epochs):
            loss, g = loss_and_grad(params, X, y)
            if not np.isfinite(loss):
                return params, float("nan")
            for k in params:
                params[k] -= alpha * g[k]
        loss = mse(params, X, y)
    return params, loss


def _inner_folds(y: np.ndarray, k: int, seed: int) -> list[np.ndarray]:
    from ..evaluation import stratified_fold_indices

    return stratified_fold_indices(y, k, seed)


def choose_alpha(X, y, init, grid, epochs, seed) -> float:
    """Learning constant with the lowest mean held-out MSE over inner stratified folds."""
    k = min(INNER_FOLDS, int(np.bincount(y, minlength=2).min()))
    if k < 2:
        return grid[0]
    folds = _inner_folds(y, k, derive_seed(seed, "alpha-cv"))
    best, best_loss = None, np.inf
    for alpha in grid:
        losses = []
        for f in folds:
            train = np.setdiff1d(np.arange(len(y)), f)
            params, loss = gradient_descent(init, X[train], y[train], alpha, epochs)
            if not np.isfinite(loss):
                losses = None
                break
            losses.append(mse(params, X[f], y[f]))
        if losses is None:
            continue
        m = float(np.mean(losses))
        if m < best_loss:
            best, best_loss = alpha, m
    if best is None:
        raise TrainingError("ANN training diverged for every learning constant")
    return best


@register
class ANNModel(TrainedModel):
    kind = "ANN"

    def __init__(self, params, hyperparams=None):
        self.net = {k: np.asarray(v, dtype=float) for k, v in params.items()}
        self.hyperparams = hyperparams or {}
        self.training_score = {}

    def predict_score(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        return forward(self.net, X)[1]

    def params(self):
        return {k: v.tolist() for k, v in self.net.items()}

    @classmethod
    def from_params(cls, doc):
        return cls(doc["params"])


def train_ann(X, y, spec: LearnerSpec | None = None) -> ANNModel:
    X, y = check_xy(X, y)
    hp = dict(spec.hyperparams) if spec else {}
    seed = spec.seed if spec else 0
    p = X.shape[1]
    h = hp.get("hidden", hidden_units(p))
    epochs = hp.get("epochs", EPOCHS)
    grid = tuple(sorted(hp.get("alpha_grid", ALPHA_GRID), reverse=True))
    rng = np.random.default_rng(seed)
    init = init_params(p, h, rng)
    yf = y.astype(float)

    if "alpha" in hp:
        candidates = [hp["alpha"]]
    else:
        chosen = choose_alpha(X, y, init, grid, epochs, seed)
        candidates = [a for a in grid if a <= chosen]
    for alpha in candidates:
        params, loss = gradient_descent(init, X, yf, alpha, epochs)
        if np.isfinite(loss):
            break
        log.warning("ANN diverged at alpha=%g, retrying smaller", alpha)
    else:
        raise TrainingError("ANN training diverged for every learning constant")

    model = ANNModel(params, {**hp, "hidden": h, "epochs": epochs, "alpha": alpha})
    model._set_training_score(X, y)
    return model
