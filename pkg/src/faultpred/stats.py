"""Wilcoxon signed-rank tests and Bonferroni-corrected pairwise comparison."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import norm, rankdata

EXACT_MAX_N = 12


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # min(W+, W-)
    p_value: float
    w_plus: float
    w_minus: float
    n: int  # pairs left after dropping zero differences
    exact: bool
    mean_difference: float


def _exact_two_sided(doubled_ranks: np.ndarray, t_obs: int) -> float:
    """P(|T - E T| >= |t_obs - E T|) under random signs, T = sum of doubled ranks with + sign.

    Doubled average ranks are integers, so the null distribution is built by an
    integer subset-sum count.
    """
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled_ranks.astype(int):
        counts[r:] = counts[r:] + counts[: total + 1 - r].copy()
    sums = np.arange(total + 1)
    extreme = np.abs(2 * sums - total) >= abs(2 * t_obs - total)
    return min(1.0, int(counts[extreme].sum()) / 2 ** len(doubled_ranks))


def wilcoxon_signed_rank(x, y, exact_max_n: int = EXACT_MAX_N) -> WilcoxonResult:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be equal-length 1-D vectors")
    diff = x - y
    mean_diff = float(diff.mean()) if len(diff) else 0.0
    d = diff[diff != 0]
    n = len(d)
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0.0, 0.0, 0, True, mean_diff)
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    stat = min(w_plus, w_minus)

    if n <= exact_max_n:
        doubled = np.rint(2 * ranks).astype(int)
        p = _exact_two_sided(doubled, int(doubled[d > 0].sum()))
        return WilcoxonResult(stat, p, w_plus, w_minus, n, True, mean_diff)

    # normal tail with continuity correction plus the Edgeworth kurtosis term;
    # moments come from the (average) ranks, so ties are accounted for exactly
    mu = float(ranks.sum()) / 2.0
    var = float((ranks**2).sum()) / 4.0
    if var <= 0:
        return WilcoxonResult(stat, 1.0, w_plus, w_minus, n, False, mean_diff)
    excess_kurtosis = -float((ranks**4).sum()) / 8.0 / var**2
    z = max(abs(w_plus - mu) - 0.5, 0.0) / math.sqrt(var)
    tail = float(norm.sf(z)) + float(norm.pdf(z)) * excess_kurtosis / 24.0 * (z**3 - 3.0 * z)
    p = min(1.0, max(0.0, 2.0 * tail))
    return WilcoxonResult(stat, p, w_plus, w_minus, n, False, mean_diff)


def bonferroni_cutoff(alpha: float, n_items: int) -> float:
    """Per-pair significance cutoff when all ``n_items`` are compared pairwise."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if n_items < 2:
        raise ValueError("need at least 2 items to compare")
    return alpha / math.comb(n_items, 2)


@dataclass
class ComparisonMatrix:
    labels: tuple[str, ...]
    mean_diff: np.ndarray  # row minus column
    p_values: np.ndarray
    cutoff: float
    alpha: float

    @property
    def significant(self) -> np.ndarray:
        flags = self.p_values < self.cutoff
        np.fill_diagonal(flags, False)
        return flags

    def n_significant_pairs(self) -> int:
        return int(np.triu(self.significant, 1).sum())

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "alpha": self.alpha,
            "cutoff": self.cutoff,
            "mean_difference": self.mean_diff.tolist(),
            "p_value": self.p_values.tolist(),
            "significant": self.significant.tolist(),
        }

    def to_csv(self) -> str:
        """Two blocks: mean differences, then p-values."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for title, M in (("mean_difference", self.mean_diff), ("p_value", self.p_values)):
            w.writerow([title, *self.labels])
            for lab, row in zip(self.labels, M):
                w.writerow([lab, *(repr(float(v)) for v in row)])
        w.writerow(["cutoff", repr(self.cutoff)])
        return buf.getvalue()


def pairwise_compare(results: Mapping[str, Sequence[float]], alpha: float = 0.05) -> ComparisonMatrix:
    labels = tuple(results)
    if len(labels) < 2:
        raise ValueError("need at least 2 result vectors")
    vecs = [np.asarray(results[k], dtype=float) for k in labels]
    if len({len(v) for v in vecs}) > 1:
        raise ValueError("all result vectors must have equal length")
    n = len(labels)
    M = np.zeros((n, n))
    P = np.ones((n, n))
    for i, j in combinations(range(n), 2):
        r = wilcoxon_signed_rank(vecs[i], vecs[j])
        M[i, j] = r.mean_difference
        M[j, i] = -r.mean_difference
        P[i, j] = P[j, i] = r.p_value
    return ComparisonMatrix(labels, M, P, bonferroni_cutoff(alpha, n), alpha)
