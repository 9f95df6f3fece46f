"""Command-line entry point: run, validate-metrics, cost, compare."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .cost import COST_PRESETS, SCENARIOS, cost_parameters, necost
from .dataset_io import load_dataset
from .evaluation import ConfusionMatrix
from .experiment import MEASURES, ExperimentConfig, _json, emit_reports, run_experiment
from .stats import pairwise_compare
from .validation import validate_metrics

log = logging.getLogger("faultpred")


def _csv_list(s: str) -> list[str]:
    return [v.strip() for v in s.split(",") if v.strip()]


def _add_cost_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cost-preset", choices=COST_PRESETS)
    p.add_argument("--efficiency-scenario", choices=tuple(SCENARIOS))
    p.add_argument("--mp", dest="m_p", type=float, help="fraction of classes unit-tested without prediction")
    p.add_argument("--setup-cost", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="faultpred", description="Fault-proneness prediction experiments.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="full pipeline over a directory of metric tables")
    run.add_argument("--config", help="JSON or key=value config file")
    run.add_argument("--manifest", help="replay the configuration recorded in a run manifest")
    run.add_argument("--data-dir")
    run.add_argument("--out", required=True, help="output directory (replaced atomically)")
    run.add_argument("--seed", type=int)
    run.add_argument("--k", type=int, help="number of folds")
    run.add_argument("--alpha", type=float)
    run.add_argument("--datasets", type=_csv_list, help="comma-separated dataset names")
    run.add_argument("--techniques", type=_csv_list)
    run.add_argument("--metric-sets", type=_csv_list)
    run.add_argument("--normalize", choices=("fold", "global"))
    run.add_argument("--include-large", action="store_true", default=None)
    run.add_argument("--workers", type=int)
    _add_cost_flags(run)

    vm = sub.add_parser("validate-metrics", help="t-test filter plus stepwise selection")
    vm.add_argument("paths", nargs="+", help="metric table CSV files")
    vm.add_argument("--alpha", type=float, default=0.05)
    vm.add_argument("--out", help="write JSON here instead of stdout")

    cost = sub.add_parser("cost", help="cost ratio for explicit confusion counts")
    for name in ("tp", "fp", "tn", "fn"):
        cost.add_argument(f"--{name}", type=int, required=True)
    cost.add_argument("--total", type=int, help="classes in the system (default tp+fp+tn+fn)")
    cost.add_argument("--faulty", type=int, help="faulty classes (default tp+fn)")
    _add_cost_flags(cost)

    cmp_ = sub.add_parser("compare", help="pairwise Wilcoxon comparison over a summary CSV")
    cmp_.add_argument("summary", help="summary.csv written by `run`")
    cmp_.add_argument("--measure", choices=MEASURES, default="accuracy")
    cmp_.add_argument("--by", choices=("technique", "metric_set"), default="technique")
    cmp_.add_argument("--alpha", type=float, default=0.05)
    cmp_.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
    return ap


_OVERRIDES = ("data_dir", "seed", "k", "alpha", "datasets", "techniques", "metric_sets", "normalize",
              "include_large", "workers", "cost_preset", "efficiency_scenario", "m_p", "setup_cost")


def config_from_args(args) -> ExperimentConfig:
    if args.config and args.manifest:
        raise ValueError("--config and --manifest are mutually exclusive")
    base = {}
    src = args.config or args.manifest
    if src:
        base = ExperimentConfig.from_file(src).to_dict()
    for key in _OVERRIDES:
        v = getattr(args, key, None)
        if v is not None:
            base[key] = v
    return ExperimentConfig.from_dict(base)


def cmd_run(args) -> int:
    cfg = config_from_args(args)
    bundle = run_experiment(cfg)
    files = emit_reports(bundle, args.out)
    skipped = sum(not c.ok for c in bundle.cells)
    print(json.dumps({"out": str(Path(args.out).resolve()), "files": len(files),
                      "cells": len(bundle.cells), "skipped_cells": skipped}))
    return 0


def cmd_validate(args) -> int:
    out = {}
    for p in args.paths:
        d = load_dataset(p)
        out[d.name] = validate_metrics(d, args.alpha).to_dict()
    text = _json(out)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_cost(args) -> int:
    params = cost_parameters(
        args.cost_preset or "mean",
        args.efficiency_scenario or "medium",
        0.5 if args.m_p is None else args.m_p,
        args.setup_cost or 0.0,
    )
    cm = ConfusionMatrix(args.tp, args.fp, args.tn, args.fn)
    total = cm.total if args.total is None else args.total
    faulty = cm.tp + cm.fn if args.faulty is None else args.faulty
    rep = necost(cm, total, faulty, params)
    print(json.dumps({**rep.to_dict(), "verdict": rep.verdict, "parameters": params.to_dict()}, indent=2))
    return 0


def read_summary(path, measure: str, by: str) -> dict[str, list[float]]:
    other = "metric_set" if by == "technique" else "technique"
    table: dict[tuple, dict[str, float]] = {}
    labels: list[str] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {measure, by, other, "dataset"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            lab = row[by]
            if lab not in labels:
                labels.append(lab)
            if row.get("status", "ok") != "ok" or row[measure] == "":
                continue
            table.setdefault((row["dataset"], row[other]), {})[lab] = float(row[measure])
    keys = sorted(k for k, r in table.items() if all(lab in r for lab in labels))
    if len(labels) < 2 or not keys:
        raise ValueError("need at least two groups with complete paired results")
    return {lab: [table[k][lab] for k in keys] for lab in labels}


def cmd_compare(args) -> int:
    cm = pairwise_compare(read_summary(args.summary, args.measure, args.by), args.alpha)
    sys.stdout.write(_json(cm.to_dict()) if args.json else cm.to_csv())
    return 0


COMMANDS = {"run": cmd_run, "validate-metrics": cmd_validate, "cost": cmd_cost, "compare": cmd_compare}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:  # noqa: BLE001 - reported as a machine-readable summary
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        sys.stderr.write(json.dumps(err) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
