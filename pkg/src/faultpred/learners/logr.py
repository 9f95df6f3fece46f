from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .base import LearnerSpec, TrainedModel, check_xy, register

log = logging.getLogger(__name__)

RIDGE = 1e-6


@dataclass
class LogitFit:
    coef: np.ndarray  # intercept first
    n_iter: int
    converged: bool
    separated: bool
    log_likelihood: float


def _penalized_ll(A, y, beta, ridge):
    eta = A @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)) - 0.5 * ridge * beta[1:] @ beta[1:])


def fit_logistic(X, y, max_iter: int = 100, tol: float = 1e-8, ridge: float = RIDGE) -> LogitFit:
    """Maximum-likelihood logistic regression by iteratively reweighted least squares.

    A small L2 ridge on the slopes (not the intercept) keeps the Newton system
    solvable; it only matters under (quasi-)complete separation, where
    coefficients would otherwise diverge.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.column_stack([np.ones(len(X)), X])
    beta = np.zeros(A.shape[1])
    ll = _penalized_ll(A, y, beta, ridge)
    converged = max_iter == 0
    it = 0
    eye = np.eye(A.shape[1])
    eye[0, 0] = 0.0
    for it in range(1, max_iter + 1):
        p = expit(A @ beta)
        w = p * (1 - p)
        grad = A.T @ (y - p) - ridge * (eye @ beta)
        H = (A * w[:, None]).T @ A + ridge * eye
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        t = 1.0
        while True:
            cand = beta + t * step
            ll_new = _penalized_ll(A, y, cand, ridge)
            if ll_new >= ll - 1e-12 or t < 1e-10:
                break
            t *= 0.5
        beta = cand
        done = abs(ll_new - ll) < tol
        ll = ll_new
        if done:
            converged = True
            break
    eta = A @ beta
    separated = bool(np.all((eta > 0) == (y == 1)) and np.all(eta != 0)) and max_iter > 0
    return LogitFit(beta, it if max_iter else 0, converged, separated, ll)


@register
class LogisticModel(TrainedModel):
    kind = "LOGR"

    def __init__(self, coef, hyperparams=None):
        self.coef = np.asarray(coef, dtype=float)
        self.hyperparams = hyperparams or {}
        self.training_score = {}

    @property
    def intercept(self) -> float:
        return float(self.coef[0])

    @property
    def weights(self) -> np.ndarray:
        return self.coef[1:]

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        return self.coef[0] + X @ self.coef[1:]

    def predict_score(self, X) -> np.ndarray:
        return expit(self.decision_function(X))

    def params(self):
        return {"coef": self.coef.tolist()}

    @classmethod
    def from_params(cls, doc):
        return cls(doc["params"]["coef"])


def train_logr(X, y, spec: LearnerSpec | None = None) -> LogisticModel:
    X, y = check_xy(X, y)
    hp = dict(spec.hyperparams) if spec else {}
    fit = fit_logistic(X, y, max_iter=hp.get("max_iter", 100), tol=hp.get("tol", 1e-8))
    if fit.separated:
        log.warning("logistic regression: perfect separation, coefficients held finite by ridge %g", RIDGE)
    model = LogisticModel(fit.coef, hp)
    model.separated = fit.separated
    model.n_iter = fit.n_iter
    model._set_training_score(X, y)
    return model
