"""Full study orchestration: datasets x metric sets x techniques, costs, thresholds, comparisons."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import platform
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
import scipy

from . import __version__
from .cost import SCENARIOS, CostReport, ThresholdModel, cost_parameters, fit_threshold, necost
from .dataset_io import LARGE_PROJECTS, METRICS, Dataset, DatasetError, load_dataset
from .evaluation import TECHNIQUES, PerformanceReport, cross_validate_techniques
from .stats import ComparisonMatrix, pairwise_compare
from .validation import SelectedMetricSet, validate_metrics

log = logging.getLogger(__name__)

METRIC_SETS = ("AM", "SM")
MEASURES = ("accuracy", "f_measure") + tuple(f"necost_{s}" for s in SCENARIOS)
SEED_DERIVATION = "blake2b-64('|'.join([master_seed, dataset, kind, fold])) >> 1; folds from (master_seed, dataset, 'folds')"


class SkipReason(str, Enum):
    LOAD_ERROR = "load_error"
    VALIDATION_ERROR = "validation_error"
    TRAINING_ERROR = "training_error"
    NO_EVALUABLE_FOLD = "no_evaluable_fold"
    UNDEFINED_COST = "undefined_cost"
    INSUFFICIENT_POINTS = "insufficient_points"
    SINGLE_OUTCOME = "single_outcome"


@dataclass
class ExperimentConfig:
    data_dir: str = "data"
    datasets: list[str] = field(default_factory=list)
    include_large: bool = False
    techniques: list[str] = field(default_factory=lambda: list(TECHNIQUES))
    metric_sets: list[str] = field(default_factory=lambda: list(METRIC_SETS))
    k: int = 10
    seed: int = 0
    alpha: float = 0.05
    normalize: str = "fold"
    cost_preset: str = "mean"
    efficiency_scenario: str = "medium"
    m_p: float = 0.5
    setup_cost: float = 0.0
    hyperparams: dict = field(default_factory=dict)
    workers: int = field(default=1, metadata={"manifest": False})

    def __post_init__(self):
        bad = [t for t in self.techniques if t not in TECHNIQUES]
        if bad:
            raise ValueError(f"unknown techniques: {bad}")
        bad = [m for m in self.metric_sets if m not in METRIC_SETS]
        if bad:
            raise ValueError(f"unknown metric sets: {bad}")
        if self.efficiency_scenario not in SCENARIOS:
            raise ValueError(f"efficiency scenario must be one of {tuple(SCENARIOS)}")
        cost_parameters(self.cost_preset, self.efficiency_scenario, self.m_p, self.setup_cost)

    def to_dict(self, manifest: bool = False) -> dict:
        out = {}
        for f in fields(self):
            if manifest and not f.metadata.get("manifest", True):
                continue
            out[f.name] = getattr(self, f.name)
        return json.loads(json.dumps(out))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        """JSON object, or flat ``key = value`` lines (lists comma-separated)."""
        text = Path(path).read_text()
        try:
            d = json.loads(text)
        except json.JSONDecodeError:
            d = parse_flat_config(text)
        if "config" in d and isinstance(d["config"], dict):  # a run manifest
            d = d["config"]
        return cls.from_dict(d)


_LIST_KEYS = {"datasets", "techniques", "metric_sets"}
_TYPES = {"include_large": bool, "k": int, "seed": int, "alpha": float, "m_p": float, "setup_cost": float, "workers": int}


def parse_flat_config(text: str) -> dict:
    out: dict[str, Any] = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key in _LIST_KEYS:
            out[key] = [v.strip() for v in value.split(",") if v.strip()]
        elif _TYPES.get(key) is bool:
            out[key] = value.lower() in ("1", "true", "yes", "on")
        elif key in _TYPES:
            out[key] = _TYPES[key](value)
        else:
            out[key] = value
    return out


@dataclass
class Cell:
    dataset: str
    technique: str
    metric_set: str
    report: PerformanceReport | None = None
    costs: dict[str, CostReport] = field(default_factory=dict)
    skip_reason: SkipReason | None = None
    detail: str = ""

    @property
    def seed_key(self) -> str:
        """Hash parts feeding this cell's learners (master seed and fold index omitted)."""
        if self.technique in ("BTE", "MVE"):
            return f"{self.dataset}|<each base kind>|fold"
        if self.technique == "NDTF":
            return f"{self.dataset}|<each base kind>|fold + {self.dataset}|NDTF|fold"
        return f"{self.dataset}|{self.technique}|fold"

    @property
    def ok(self) -> bool:
        return self.skip_reason is None


@dataclass
class DatasetInfo:
    name: str
    n_classes: int
    n_faulty: int
    faulty_percent: float


@dataclass
class ThresholdRow:
    group_type: str
    group: str
    scenario: str
    model: ThresholdModel | None
    skip_reason: SkipReason | None = None


@dataclass
class RunBundle:
    config: ExperimentConfig
    datasets: list[DatasetInfo]
    selections: dict[str, SelectedMetricSet]
    cells: list[Cell]
    thresholds: list[ThresholdRow]
    comparisons: dict[str, ComparisonMatrix]
    dataset_errors: dict[str, str] = field(default_factory=dict)

    def cell(self, dataset: str, technique: str, metric_set: str) -> Cell:
        for c in self.cells:
            if (c.dataset, c.technique, c.metric_set) == (dataset, technique, metric_set):
                return c
        raise KeyError((dataset, technique, metric_set))


def measure_value(cell: Cell, measure: str) -> float | None:
    if not cell.ok:
        return None
    if measure == "accuracy":
        return cell.report.accuracy
    if measure == "f_measure":
        return cell.report.f_measure
    if measure.startswith("necost_"):
        c = cell.costs.get(measure[len("necost_"):])
        return c.necost if c else None
    raise ValueError(f"unknown measure {measure!r}")


# -- per-dataset work ------------------------------------------------------------


def _dataset_paths(cfg: ExperimentConfig) -> list[Path]:
    paths = sorted(Path(cfg.data_dir).glob("*.csv"))
    if not paths and not Path(cfg.data_dir).is_dir():
        raise FileNotFoundError(f"data directory {cfg.data_dir!r} not found")
    out = []
    for p in paths:
        if cfg.datasets and p.stem not in cfg.datasets:
            continue
        if not cfg.include_large and p.stem in LARGE_PROJECTS:
            continue
        out.append(p)
    return out


def _cost_reports(report: PerformanceReport, cfg: ExperimentConfig) -> dict[str, CostReport]:
    cm = report.pooled
    out = {}
    for scenario in SCENARIOS:
        params = cost_parameters(cfg.cost_preset, scenario, cfg.m_p, cfg.setup_cost)
        out[scenario] = necost(cm, cm.total, cm.tp + cm.fn, params)
    return out


def run_dataset(cfg: ExperimentConfig, d: Dataset) -> tuple[SelectedMetricSet | None, list[Cell]]:
    cells = []
    try:
        selection = validate_metrics(d, cfg.alpha)
    except Exception as exc:  # noqa: BLE001 - recorded as a skip
        selection = None
        sel_error = f"{type(exc).__name__}: {exc}"
    for ms in cfg.metric_sets:
        if ms == "SM" and selection is None:
            for t in cfg.techniques:
                cells.append(Cell(d.name, t, ms, skip_reason=SkipReason.VALIDATION_ERROR, detail=sel_error))
            continue
        metrics = list(METRICS) if ms == "AM" else selection.metrics
        try:
            reports = cross_validate_techniques(cfg.techniques, metrics, d, cfg.k, cfg.seed, cfg.normalize, cfg.hyperparams)
        except Exception:  # noqa: BLE001 - isolate the failing technique below
            reports = {}
            for t in cfg.techniques:
                try:
                    reports.update(cross_validate_techniques([t], metrics, d, cfg.k, cfg.seed, cfg.normalize, cfg.hyperparams))
                except Exception as exc:  # noqa: BLE001
                    cells.append(Cell(d.name, t, ms, skip_reason=SkipReason.TRAINING_ERROR, detail=f"{type(exc).__name__}: {exc}"))
        for t in cfg.techniques:
            if t not in reports:
                continue
            rep = reports[t]
            cell = Cell(d.name, t, ms, rep)
            if not rep.folds:
                cell.skip_reason = SkipReason.NO_EVALUABLE_FOLD
                cell.detail = "every fold was skipped"
            else:
                try:
                    cell.costs = _cost_reports(rep, cfg)
                except ZeroDivisionError as exc:
                    cell.skip_reason = SkipReason.UNDEFINED_COST
                    cell.detail = str(exc)
            cells.append(cell)
    order = {(t, m): i for i, (m, t) in enumerate((m, t) for m in cfg.metric_sets for t in cfg.techniques)}
    cells.sort(key=lambda c: order[(c.technique, c.metric_set)])
    return selection, cells


def _worker(cfg_dict: dict, path: str):
    logging.getLogger().setLevel(logging.ERROR)
    cfg = ExperimentConfig.from_dict(cfg_dict)
    try:
        d = load_dataset(path)
    except (DatasetError, OSError) as exc:
        return Path(path).stem, None, None, [], f"{type(exc).__name__}: {exc}"
    info = DatasetInfo(d.name, len(d), d.n_faulty, d.faulty_percent)
    selection, cells = run_dataset(cfg, d)
    return d.name, info, selection, cells, None


# -- study-level aggregation ------------------------------------------------------


def _fit_rows(group_type, group, scenario, points) -> ThresholdRow:
    if len(points) < 2:
        return ThresholdRow(group_type, group, scenario, None, SkipReason.INSUFFICIENT_POINTS)
    if len({u for _, u in points}) < 2:
        return ThresholdRow(group_type, group, scenario, None, SkipReason.SINGLE_OUTCOME)
    return ThresholdRow(group_type, group, scenario, fit_threshold(points))


def fit_thresholds(cfg: ExperimentConfig, infos: dict[str, DatasetInfo], cells: list[Cell]) -> list[ThresholdRow]:
    rows = []
    groups = [("technique", t, lambda c, t=t: c.technique == t) for t in cfg.techniques]
    groups += [("metric_set", m, lambda c, m=m: c.metric_set == m) for m in cfg.metric_sets]
    for scenario in SCENARIOS:
        for gtype, gname, pred in groups:
            pts = [
                (infos[c.dataset].faulty_percent, c.costs[scenario].useful)
                for c in cells
                if c.ok and pred(c)
            ]
            rows.append(_fit_rows(gtype, gname, scenario, pts))
    return rows


def comparison_vectors(cells: list[Cell], by: str, measure: str, labels: list[str]) -> dict[str, list[float]]:
    """Complete-case paired vectors; pairing key is the cell's other two coordinates."""
    other = "metric_set" if by == "technique" else "technique"
    table: dict[tuple, dict[str, float]] = {}
    for c in cells:
        v = measure_value(c, measure)
        if v is None:
            continue
        table.setdefault((c.dataset, getattr(c, other)), {})[getattr(c, by)] = v
    keys = sorted(k for k, row in table.items() if all(lab in row for lab in labels))
    return {lab: [table[k][lab] for k in keys] for lab in labels}


def compare_all(cfg: ExperimentConfig, cells: list[Cell]) -> dict[str, ComparisonMatrix]:
    out = {}
    for by, labels in (("technique", cfg.techniques), ("metric_set", cfg.metric_sets)):
        if len(labels) < 2:
            continue
        for measure in MEASURES:
            vecs = comparison_vectors(cells, by, measure, list(labels))
            if not vecs[labels[0]]:
                continue
            out[f"{by}_{measure}"] = pairwise_compare(vecs, cfg.alpha)
    return out


def run_experiment(cfg: ExperimentConfig) -> RunBundle:
    paths = _dataset_paths(cfg)
    cfg_dict = cfg.to_dict()
    if cfg.workers > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_worker, [cfg_dict] * len(paths), [str(p) for p in paths]))
    else:
        results = [_worker(cfg_dict, str(p)) for p in paths]

    infos, selections, cells, errors = {}, {}, [], {}
    for name, info, selection, dcells, err in results:
        if err is not None:
            errors[name] = err
            for ms in cfg.metric_sets:
                for t in cfg.techniques:
                    cells.append(Cell(name, t, ms, skip_reason=SkipReason.LOAD_ERROR, detail=err))
            continue
        infos[name] = info
        if selection is not None:
            selections[name] = selection
        cells.extend(dcells)

    return RunBundle(
        cfg,
        list(infos.values()),
        selections,
        cells,
        fit_thresholds(cfg, infos, cells),
        compare_all(cfg, cells),
        errors,
    )


# -- reports ---------------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    if isinstance(obj, Enum):
        return obj.value
    return obj


def _json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in r])
    return buf.getvalue()


def render_reports(bundle: RunBundle) -> dict[str, str]:
    """All report files as {relative name: text}."""
    cfg = bundle.config
    infos = {d.name: d for d in bundle.datasets}
    files: dict[str, str] = {}

    files["datasets.csv"] = _csv(
        ["dataset", "n_classes", "n_faulty", "faulty_percent"],
        [[d.name, d.n_classes, d.n_faulty, round(d.faulty_percent, 2)] for d in bundle.datasets],
    )

    summary_rows, runs = [], []
    for c in bundle.cells:
        info = infos.get(c.dataset)
        row = [c.dataset, c.technique, c.metric_set]
        row += [info.faulty_percent if info else None]
        if c.report is not None and c.report.folds:
            r = c.report
            cm = r.pooled
            row += [len(r.metric_set), r.accuracy, r.f_measure, r.mean_accuracy, r.mean_f_measure]
            row += [cm.tp, cm.fp, cm.tn, cm.fn, len(r.skipped)]
        else:
            row += [None] * 10
        for s in SCENARIOS:
            cr = c.costs.get(s)
            row += [cr.ecost, cr.tcost, cr.necost, int(cr.useful)] if cr else [None] * 4
        row += ["ok" if c.ok else "skipped", c.skip_reason.value if c.skip_reason else "", c.detail, c.seed_key]
        summary_rows.append(row)
        runs.append({
            "dataset": c.dataset,
            "technique": c.technique,
            "metric_set_id": c.metric_set,
            "seed": cfg.seed,
            "status": "ok" if c.ok else "skipped",
            "skip_reason": c.skip_reason,
            "detail": c.detail,
            "performance": c.report.to_dict() if c.report else None,
            "cost": {s: cr.to_dict() for s, cr in c.costs.items()},
        })
    header = ["dataset", "technique", "metric_set", "faulty_percent", "n_metrics", "accuracy", "f_measure",
              "fold_mean_accuracy", "fold_mean_f_measure", "tp", "fp", "tn", "fn", "skipped_folds"]
    for s in SCENARIOS:
        header += [f"ecost_{s}", f"tcost_{s}", f"necost_{s}", f"useful_{s}"]
    header += ["status", "skip_reason", "detail", "seed_key"]
    files["summary.csv"] = _csv(header, summary_rows)
    files["runs.json"] = _json(runs)
    files["selection.json"] = _json({k: v.to_dict() for k, v in bundle.selections.items()})

    files["thresholds.csv"] = _csv(
        ["group_type", "group", "scenario", "constant", "coefficient", "threshold_percent", "n_points",
         "separated", "status", "skip_reason"],
        [
            [t.group_type, t.group, t.scenario,
             *( [t.model.constant, t.model.coefficient, t.model.threshold_percent, t.model.n_points,
                 int(t.model.separated)] if t.model else [None] * 5),
             "ok" if t.model else "skipped", t.skip_reason.value if t.skip_reason else ""]
            for t in bundle.thresholds
        ],
    )

    for name, cm in bundle.comparisons.items():
        files[f"comparison_{name}.csv"] = cm.to_csv()
    files["comparisons.json"] = _json({k: v.to_dict() for k, v in bundle.comparisons.items()})

    for measure in MEASURES:
        for by, labels, other in (("technique", cfg.techniques, "metric_set"), ("metric_set", cfg.metric_sets, "technique")):
            table: dict[tuple, dict] = {}
            for c in bundle.cells:
                table.setdefault((c.dataset, getattr(c, other)), {})[getattr(c, by)] = measure_value(c, measure)
            rows = [[k[0], k[1], *(table[k].get(lab) for lab in labels)] for k in table]
            files[f"boxplot_{measure}_by_{by}.csv"] = _csv(["dataset", other, *labels], rows)

    manifest = {
        "tool": "faultpred",
        "version": __version__,
        "config": cfg.to_dict(manifest=True),
        "seed_derivation": SEED_DERIVATION,
        "environment": {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
        "dataset_errors": bundle.dataset_errors,
        "cells": [
            {"dataset": c.dataset, "technique": c.technique, "metric_set": c.metric_set,
             "seed_key": f"{cfg.seed}|{c.seed_key}", "status": "ok" if c.ok else "skipped"}
            for c in bundle.cells
        ],
        "files": sorted(files) + ["manifest.json"],
    }
    files["manifest.json"] = _json(manifest)
    return files


def emit_reports(bundle: RunBundle, out_dir: str | Path) -> list[Path]:
    """Write every report into ``out_dir`` atomically (stage in a sibling dir, then rename)."""
    out_dir = Path(out_dir).resolve()
    parent = out_dir.parent
    if not parent.is_dir() or not os.access(parent, os.W_OK | os.X_OK):
        raise PermissionError(f"cannot write into {parent}")
    if out_dir.exists() and not out_dir.is_dir():
        raise NotADirectoryError(str(out_dir))
    files = render_reports(bundle)
    staging = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.", dir=parent))
    try:
        for name, text in files.items():
            (staging / name).write_text(text)
        if out_dir.exists():
            old = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.old.", dir=parent))
            os.rename(out_dir, old / "prev")
            os.rename(staging, out_dir)
            shutil.rmtree(old)
        else:
            os.rename(staging, out_dir)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    return [out_dir / n for n in sorted(files)]


