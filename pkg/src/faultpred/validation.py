"""Two-stage source-code metric validation: t-test filter, then stepwise forward wrapper."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np
from scipy import stats

from .dataset_io import Dataset, normalize

log = logging.getLogger(__name__)

ALPHA = 0.05
P_ENTER = 0.05


def _finite_or_none(v: float):
    return v if math.isfinite(v) else None


@dataclass(frozen=True)
class MetricTest:
    metric: str
    t_statistic: float
    p_value: float
    selected: bool
    degenerate: bool

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "t": _finite_or_none(self.t_statistic),
            "p": self.p_value,
            "selected": self.selected,
            "degenerate": self.degenerate,
        }


@dataclass
class TTestReport:
    alpha: float
    entries: list[MetricTest]
    warnings: list[str] = field(default_factory=list)

    @property
    def selected(self) -> list[str]:
        return [e.metric for e in self.entries if e.selected]

    def __getitem__(self, metric: str) -> MetricTest:
        for e in self.entries:
            if e.metric == metric:
                return e
        raise KeyError(metric)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "metrics": [e.to_dict() for e in self.entries], "warnings": self.warnings}


def welch_ttest(a, b) -> tuple[float, float, bool]:
    """Two-sided Welch t-test of mean(a) - mean(b). Returns (t, p, degenerate)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    va, vb = a.var(ddof=1), b.var(ddof=1)
    diff = a.mean() - b.mean()
    if va == 0 and vb == 0:
        if diff == 0:
            return 0.0, 1.0, True
        return math.copysign(math.inf, diff), 0.0, True
    sa, sb = va / len(a), vb / len(b)
    se2 = sa + sb
    t = diff / math.sqrt(se2)
    df = se2**2 / (sa**2 / (len(a) - 1) + sb**2 / (len(b) - 1))
    p = float(2 * stats.t.sf(abs(t), df))
    return float(t), min(p, 1.0), False


def ttest_filter(d: Dataset, alpha: float = ALPHA) -> TTestReport:
    if not d.normalized:
        raise ValueError("t-test filter expects a normalized dataset")
    faulty = d.X[d.y == 1]
    clean = d.X[d.y == 0]
    if len(faulty) < 2 or len(clean) < 2:
        msg = f"{d.name}: a label group has fewer than 2 records; no metric selected"
        log.warning(msg)
        entries = [MetricTest(m, 0.0, 1.0, False, True) for m in d.metrics]
        return TTestReport(alpha, entries, [msg])
    entries = []
    for j, m in enumerate(d.metrics):
        t, p, degenerate = welch_ttest(faulty[:, j], clean[:, j])
        entries.append(MetricTest(m, t, p, (p < alpha) and not degenerate, degenerate))
    return TTestReport(alpha, entries)


class StepCriterion(Protocol):
    name: str

    def score(self, X_current: np.ndarray, x_new: np.ndarray, y: np.ndarray) -> tuple[float, float] | None:
        """(merit, p-to-enter) of adding ``x_new``; higher merit is better. None if singular."""


class MLRPartialF:
    """Partial F-test for adding one regressor to an OLS fit of the 0/1 label."""

    name = "mlr-partial-F"

    @staticmethod
    def rss(A: np.ndarray, y: np.ndarray) -> float:
        coef = np.linalg.lstsq(A, y, rcond=None)[0]
        r = y - A @ coef
        return float(r @ r)

    def score(self, X_current, x_new, y):
        n = len(y)
        ones = np.ones((n, 1))
        A_old = np.hstack([ones, X_current])
        A_new = np.hstack([A_old, x_new[:, None]])
        q = A_new.shape[1] - 1
        df2 = n - q - 1
        if df2 <= 0 or np.linalg.matrix_rank(A_new) < A_new.shape[1]:
            return None
        rss_old = self.rss(A_old, y)
        rss_new = self.rss(A_new, y)
        tss = float(((y - y.mean()) ** 2).sum())
        if rss_new <= 1e-12 * max(tss, 1e-300):
            return math.inf, 0.0
        F = max(rss_old - rss_new, 0.0) / (rss_new / df2)
        return F, float(stats.f.sf(F, 1, df2))


@dataclass
class SelectedMetricSet:
    dataset: str
    alpha: float
    filter_survivors: list[str]
    wrapper_selection: list[str]
    criterion: str = MLRPartialF.name
    p_enter: float = P_ENTER
    trace: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    fallback: str | None = None
    ttest: TTestReport | None = None

    @property
    def metrics(self) -> list[str]:
        return list(self.wrapper_selection)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "alpha": self.alpha,
            "criterion": self.criterion,
            "p_enter": self.p_enter,
            "ttest": self.ttest.to_dict() if self.ttest else None,
            "filter_survivors": self.filter_survivors,
            "wrapper_selection": self.wrapper_selection,
            "trace": self.trace,
            "fallback": self.fallback,
            "warnings": self.warnings,
        }


def stepwise_forward_select(
    d: Dataset,
    candidates: Sequence[str],
    criterion: StepCriterion | None = None,
    p_enter: float = P_ENTER,
    alpha: float = ALPHA,
) -> SelectedMetricSet:
    """Greedy forward selection from the empty set.

    Each round adds the candidate with the highest merit if its p-to-enter is
    below ``p_enter``; ties go to the earlier catalog metric. Candidates that
    make the design singular are skipped for that round and logged.
    """
    criterion = criterion or MLRPartialF()
    if not candidates:
        raise ValueError("no candidate metrics")
    if d.n_faulty in (0, len(d)):
        raise ValueError("stepwise selection needs both classes")
    remaining = [m for m in d.metrics if m in set(candidates)]
    y = d.y.astype(float)
    chosen: list[str] = []
    trace: list[dict] = []
    first_best = None
    while remaining:
        X_cur = d.columns(chosen) if chosen else np.empty((len(d), 0))
        best = None
        singular = []
        for m in remaining:
            s = criterion.score(X_cur, d.columns([m])[:, 0], y)
            if s is None:
                singular.append(m)
                continue
            if best is None or s[0] > best[1]:
                best = (m, s[0], s[1])
        step = {"round": len(trace) + 1, "skipped_singular": singular}
        if best is None:
            trace.append({**step, "added": None, "stop": "no admissible candidate"})
            break
        if first_best is None:
            first_best = best
        merit = _finite_or_none(best[1])
        if best[2] >= p_enter:
            trace.append({**step, "best": best[0], "merit": merit, "p": best[2], "added": None, "stop": "p-to-enter"})
            break
        chosen.append(best[0])
        remaining.remove(best[0])
        trace.append({**step, "added": best[0], "merit": merit, "p": best[2]})
        if math.isinf(best[1]):
            trace.append({"round": len(trace) + 1, "added": None, "stop": "perfect fit"})
            break

    out = SelectedMetricSet(d.name, alpha, list(remaining_sorted(d, candidates)), chosen, criterion.name, p_enter, trace)
    if not chosen and first_best is not None:
        out.wrapper_selection = [first_best[0]]
        out.fallback = "no candidate met p-to-enter; kept the best first-round candidate"
        out.warnings.append(f"{d.name}: {out.fallback}")
        log.warning(out.warnings[-1])
    return out


def remaining_sorted(d: Dataset, names: Sequence[str]) -> list[str]:
    s = set(names)
    return [m for m in d.metrics if m in s]


def validate_metrics(d: Dataset, alpha: float = ALPHA, criterion: StepCriterion | None = None) -> SelectedMetricSet:
    """Normalize, filter by t-test, then run the stepwise wrapper on the survivors."""
    nd = d if d.normalized else normalize(d)
    report = ttest_filter(nd, alpha)
    survivors = report.selected
    if not survivors:
        msg = f"{d.name}: no metric passed the t-test filter; falling back to all metrics"
        log.warning(msg)
        return SelectedMetricSet(
            d.name, alpha, list(d.metrics), list(d.metrics),
            trace=[], warnings=report.warnings + [msg], fallback="all metrics", ttest=report,
        )
    sel = stepwise_forward_select(nd, survivors, criterion, alpha=alpha)
    sel.ttest = report
    sel.warnings = report.warnings + sel.warnings
    return sel
