"""Fault-removal cost with and without prediction, and the usefulness threshold."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable

import numpy as np

from .evaluation import ConfusionMatrix
from .learners.logr import fit_logistic

COST_PRESETS = ("min", "max", "mean", "median")
EFFICIENCY_PRESETS = ("min", "max", "median")
# low/medium/high scenarios map onto the efficiency table columns
SCENARIOS = {"low": "min", "medium": "median", "high": "max"}

DEFAULT_MP = 0.5
DEFAULT_SETUP_COST = 0.0


class UndefinedRatioError(ZeroDivisionError):
    pass


@lru_cache(maxsize=None)
def _table(name: str) -> dict[str, dict[str, float]]:
    text = resources.files("faultpred").joinpath("data", name).read_text()
    rows = csv.DictReader(text.splitlines())
    return {r["phase"]: {k: float(v) for k, v in r.items() if k != "phase"} for r in rows}


def removal_costs() -> dict[str, dict[str, float]]:
    """Staff-hours per defect by phase (unit, integration, system, field) and statistic."""
    return {k: dict(v) for k, v in _table("removal_costs.csv").items()}


def efficiencies() -> dict[str, dict[str, float]]:
    return {k: dict(v) for k, v in _table("efficiencies.csv").items()}


@dataclass(frozen=True)
class CostParameters:
    c_unit: float
    c_integration: float
    c_system: float
    c_field: float
    delta_u: float
    delta_i: float
    delta_s: float
    m_p: float = DEFAULT_MP
    c_setup: float = DEFAULT_SETUP_COST

    def __post_init__(self):
        for name in ("c_unit", "c_integration", "c_system", "c_field", "c_setup"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("delta_u", "delta_i", "delta_s", "m_p"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


def cost_parameters(
    cost_preset: str = "mean",
    efficiency: str = "median",
    m_p: float = DEFAULT_MP,
    c_setup: float = DEFAULT_SETUP_COST,
) -> CostParameters:
    """Parameters from the shipped tables.

    ``efficiency`` is a column name (min/max/median) or a scenario name
    (low/medium/high).
    """
    if cost_preset not in COST_PRESETS:
        raise ValueError(f"cost preset must be one of {COST_PRESETS}")
    col = SCENARIOS.get(efficiency, efficiency)
    if col not in EFFICIENCY_PRESETS:
        raise ValueError(f"efficiency must be one of {EFFICIENCY_PRESETS + tuple(SCENARIOS)}")
    c = _table("removal_costs.csv")
    e = _table("efficiencies.csv")
    return CostParameters(
        c["unit"][cost_preset], c["integration"][cost_preset], c["system"][cost_preset], c["field"][cost_preset],
        e["unit"][col], e["integration"][col], e["system"][col],
        m_p, c_setup,
    )


def ecost(cm: ConfusionMatrix, p: CostParameters) -> float:
    """Estimated removal cost when unit testing targets the predicted-faulty classes."""
    residual = cm.tp * (1 - p.delta_u) + cm.fn
    return (
        p.c_setup
        + p.c_unit * (cm.tp + cm.fp)
        + p.delta_i * p.c_integration * residual
        + p.delta_s * p.c_system * (1 - p.delta_i) * residual
        + (1 - p.delta_s) * p.c_field * (1 - p.delta_i) * residual
    )


def tcost(total_classes: int, faulty_classes: int, p: CostParameters) -> float:
    if not 0 <= faulty_classes <= total_classes:
        raise ValueError("need 0 <= faulty_classes <= total_classes")
    escaped = (1 - p.delta_u) * faulty_classes
    return (
        p.m_p * p.c_unit * total_classes
        + p.delta_i * p.c_integration * escaped
        + p.delta_s * p.c_system * (1 - p.delta_i) * escaped
        + (1 - p.delta_s) * p.c_field * (1 - p.delta_i) * escaped
    )


@dataclass(frozen=True)
class CostReport:
    ecost: float
    tcost: float
    necost: float

    @property
    def useful(self) -> bool:
        return self.necost < 1

    @property
    def verdict(self) -> str:
        return "fault prediction useful" if self.useful else "conventional testing preferable"

    def to_dict(self) -> dict:
        return {"ecost": self.ecost, "tcost": self.tcost, "necost": self.necost, "useful": self.useful}


def necost(cm: ConfusionMatrix, total_classes: int, faulty_classes: int, p: CostParameters) -> CostReport:
    e = ecost(cm, p)
    t = tcost(total_classes, faulty_classes, p)
    if t <= 0:
        raise UndefinedRatioError("testing cost is zero; normalized cost undefined")
    return CostReport(e, t, e / t)


@dataclass(frozen=True)
class ThresholdModel:
    """Logit of P(not useful) on faulty percentage; threshold where it crosses 0.5."""

    constant: float
    coefficient: float
    threshold_percent: float
    n_points: int
    separated: bool = False

    def probability_not_useful(self, faulty_percent) -> np.ndarray:
        z = self.constant + self.coefficient * np.asarray(faulty_percent, dtype=float)
        return 1.0 / (1.0 + np.exp(-z))

    def to_dict(self) -> dict:
        return asdict(self)


def threshold_from_logit(constant: float, coefficient: float) -> float:
    """Faulty percentage where P(not useful) = 0.5; NaN unless the slope is positive."""
    return -constant / coefficient if coefficient > 0 else math.nan


def fit_threshold(points: Iterable[tuple[float, bool]]) -> ThresholdModel:
    pts = [(float(x), bool(u)) for x, u in points]
    if len(pts) < 2:
        raise ValueError("need at least 2 points")
    x = np.array([p[0] for p in pts])
    not_useful = np.array([0 if p[1] else 1 for p in pts])
    if not_useful.min() == not_useful.max():
        raise ValueError("both useful and not-useful outcomes are required")

    fit = fit_logistic(x[:, None], not_useful)
    const, coef = float(fit.coef[0]), float(fit.coef[1])
    hi_useful, lo_not = x[not_useful == 0].max(), x[not_useful == 1].min()
    lo_useful, hi_not = x[not_useful == 0].min(), x[not_useful == 1].max()
    if hi_useful <= lo_not:
        return ThresholdModel(const, coef, float((hi_useful + lo_not) / 2), len(pts), separated=True)
    if hi_not <= lo_useful:
        return ThresholdModel(const, coef, float((hi_not + lo_useful) / 2), len(pts), separated=True)
    return ThresholdModel(const, coef, threshold_from_logit(const, coef), len(pts))
