"""Synthetic metric tables shaped like the real corpus."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from faultpred.dataset_io import METRICS, Dataset

# small, fast learner settings for end-to-end tests
FAST_HP = {
    "ANN": {"epochs": 60, "alpha": 0.5},
    "RBFN_RAN": {"epochs": 60, "alpha": 5.0},
    "RBFN_KMC": {"epochs": 60, "alpha": 5.0},
    "RBFN_FCM": {"epochs": 60, "alpha": 5.0},
    "DTF": {"n_trees": 7},
}


def synthetic_xy(n: int, faulty_pct: float, seed: int, signal: float = 1.5):
    rng = np.random.default_rng(seed)
    n_faulty = max(1, min(n - 1, round(n * faulty_pct / 100)))
    y = np.zeros(n, dtype=int)
    y[:n_faulty] = 1
    rng.shuffle(y)
    X = rng.gamma(2.0, 3.0, size=(n, len(METRICS)))
    # a few metrics carry the label
    for j in (1, 2, 3, 12):
        X[:, j] += signal * 3.0 * y
    X[:, 5] = np.round(X[:, 5])
    return X, y


def synthetic_dataset(name="synth", n=80, faulty_pct=30.0, seed=0) -> Dataset:
    X, y = synthetic_xy(n, faulty_pct, seed)
    return Dataset(name, X, y, tuple(f"C{i}" for i in range(n)))


def write_csv(path: Path, X, y, label="bug", ids=True) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow((["name"] if ids else []) + list(METRICS) + [label])
        for i, (row, lab) in enumerate(zip(X, y)):
            bugs = int(lab) * (1 + i % 3)
            w.writerow(([f"pkg.C{i}"] if ids else []) + [repr(float(v)) for v in row] + [bugs])
    return path


def write_corpus(root: Path, specs) -> Path:
    """``specs``: iterable of (name, n, faulty_pct, seed)."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for name, n, pct, seed in specs:
        X, y = synthetic_xy(n, pct, seed)
        write_csv(root / f"{name}.csv", X, y)
    return root
