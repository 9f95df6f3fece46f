from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_ITER = 300


@dataclass
class CenterSet:
    centers: np.ndarray
    widths: np.ndarray
    n_iter: int = 0
    objective_history: list[float] = field(default_factory=list)
    memberships: np.ndarray | None = None

    def __post_init__(self):
        if len(self.centers) < 1:
            raise ValueError("at least one center required")
        if np.any(self.widths <= 0):
            raise ValueError("widths must be positive")

    @property
    def k(self) -> int:
        return len(self.centers)


def _as_points(points) -> np.ndarray:
    X = np.asarray(points, dtype=float)
    return X[:, None] if X.ndim == 1 else X


def sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = (X * X).sum(1)[:, None] - 2 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def spread_widths(centers: np.ndarray, X: np.ndarray | None = None) -> np.ndarray:
    """Common width d_max / sqrt(2k), d_max the largest inter-center distance.

    When the centers are degenerate (one center, or all within 1e-3 of the
    data's RMS spread of each other, as happens when fuzzy c-means collapses
    onto the centroid) the width falls back to that RMS spread, or 1.0.
    """
    k = len(centers)
    dmax = float(np.sqrt(sq_dists(centers, centers).max())) if k > 1 else 0.0
    scale = float(np.sqrt(sq_dists(X, centers).min(axis=1).mean())) if X is not None else 0.0
    if dmax > 0 and dmax > 1e-3 * scale:
        return np.full(k, dmax / np.sqrt(2 * k))
    if scale > 0:
        return np.full(k, scale)
    return np.ones(k)


def _check_k(X, k):
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > len(X):
        raise ValueError(f"k={k} exceeds the number of points ({len(X)})")


def kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    chosen = [int(rng.integers(n))]
    d2 = sq_dists(X, X[chosen])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            i = int(rng.choice(n, p=d2 / total))
        else:
            rest = np.setdiff1d(np.arange(n), chosen)
            i = int(rng.choice(rest))
        chosen.append(i)
        d2 = np.minimum(d2, sq_dists(X, X[[i]])[:, 0])
    return X[chosen].copy()


def kmeans(points, k: int, seed: int = 0, max_iter: int = MAX_ITER) -> CenterSet:
    """Lloyd's algorithm from a k-means++ start, run to an assignment fixpoint.

    ``objective_history`` holds the within-cluster sum of squares after each
    iteration. An emptied cluster is re-seeded at the point farthest from its
    current center.
    """
    X = _as_points(points)
    _check_k(X, k)
    rng = np.random.default_rng(seed)
    C = kmeanspp_init(X, k, rng)
    labels = sq_dists(X, C).argmin(axis=1)
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        for j in range(k):
            if not np.any(labels == j):
                far = int(sq_dists(X, C)[np.arange(len(X)), labels].argmax())
                labels[far] = j
        C = np.array([X[labels == j].mean(axis=0) for j in range(k)])
        history.append(float(((X - C[labels]) ** 2).sum()))
        new = sq_dists(X, C).argmin(axis=1)
        if np.array_equal(new, labels):
            break
        labels = new
    return CenterSet(C, spread_widths(C, X), it, history)


def fcm_memberships(X: np.ndarray, C: np.ndarray, m: float) -> np.ndarray:
    d2 = sq_dists(X, C)
    zero = d2 <= 1e-24
    hit = zero.any(axis=1)
    # divide by the row minimum first so tiny distances cannot overflow the power
    ref = np.where(hit, 1.0, d2.min(axis=1))[:, None]
    with np.errstate(divide="ignore", over="ignore"):  # only rows overwritten below can overflow
        inv = (d2 / ref) ** (-1.0 / (m - 1))
    inv[zero] = 0.0
    U = inv / np.where(inv.sum(1, keepdims=True) == 0, 1.0, inv.sum(1, keepdims=True))
    if hit.any():
        # point coincides with a center: full membership there
        U[hit] = zero[hit] / zero[hit].sum(1, keepdims=True)
    return U


def fuzzy_cmeans(
    points, k: int, m: float = 2.0, seed: int = 0, tol: float = 1e-6, max_iter: int = MAX_ITER
) -> CenterSet:
    """Alternating membership / center updates of fuzzy c-means from a k-means++ start."""
    X = _as_points(points)
    _check_k(X, k)
    if m <= 1:
        raise ValueError("fuzzifier m must exceed 1")
    rng = np.random.default_rng(seed)
    # random memberships start every center near the global mean, a fixpoint
    # FCM rarely leaves; seed spread-out centers instead
    U = fcm_memberships(X, kmeanspp_init(X, k, rng), m)
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        W = U**m
        C = (W.T @ X) / W.sum(0)[:, None]
        U_new = fcm_memberships(X, C, m)
        history.append(float((U_new**m * sq_dists(X, C)).sum()))
        delta = np.abs(U_new - U).max()
        U = U_new
        if delta < tol:
            break
    W = U**m
    C = (W.T @ X) / W.sum(0)[:, None]
    return CenterSet(C, spread_widths(C, X), it, history, U)
