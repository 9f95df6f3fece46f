import csv
import io
import json

import pytest

from faultpred.evaluation import TECHNIQUES
from faultpred.experiment import (
    ExperimentConfig,
    SkipReason,
    emit_reports,
    parse_flat_config,
    render_reports,
    run_experiment,
)
from helpers import FAST_HP, write_corpus

CORPUS = [("alpha", 40, 25, 1), ("beta", 36, 50, 2)]


@pytest.fixture
def corpus(tmp_path):
    return write_corpus(tmp_path / "data", CORPUS)


def _cfg(corpus, **kw):
    base = dict(data_dir=str(corpus), techniques=["LOGR", "MVE"], k=4, seed=3, hyperparams=FAST_HP)
    base.update(kw)
    return ExperimentConfig(**base)


def _read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_cell_accounting(corpus):
    b = run_experiment(_cfg(corpus))
    assert len(b.cells) == 2 * 2 * 2
    keys = {(c.dataset, c.technique, c.metric_set) for c in b.cells}
    assert len(keys) == 8
    assert all(c.ok for c in b.cells)
    assert set(b.selections) == {"alpha", "beta"}
    for c in b.cells:
        assert set(c.costs) == {"low", "medium", "high"}
        assert c.report.pooled.total == next(d.n_classes for d in b.datasets if d.name == c.dataset)


def test_same_seed_byte_identical(corpus, tmp_path):
    a = render_reports(run_experiment(_cfg(corpus)))
    b = render_reports(run_experiment(_cfg(corpus)))
    assert a == b


def test_worker_count_does_not_change_output(corpus):
    a = render_reports(run_experiment(_cfg(corpus, workers=1)))
    b = render_reports(run_experiment(_cfg(corpus, workers=2)))
    assert a == b


def test_adding_a_dataset_leaves_other_cells_alone(corpus, tmp_path):
    solo = run_experiment(_cfg(corpus, datasets=["alpha"]))
    both = run_experiment(_cfg(corpus))
    for c in solo.cells:
        other = both.cell(c.dataset, c.technique, c.metric_set)
        assert other.report.pooled == c.report.pooled


def test_threshold_table_shape(corpus, tmp_path):
    data = write_corpus(tmp_path / "more", [("a", 40, 10, 1), ("b", 40, 40, 2), ("c", 40, 70, 3)])
    b = run_experiment(ExperimentConfig(data_dir=str(data), k=4, hyperparams=FAST_HP))
    rows = [(t.group_type, t.group, t.scenario) for t in b.thresholds]
    assert len(rows) == 8 * 3 + 2 * 3
    assert sum(1 for r in rows if r[0] == "technique") == 24
    assert {r[1] for r in rows if r[0] == "technique"} == set(TECHNIQUES)
    for t in b.thresholds:
        assert (t.model is None) == (t.skip_reason is not None)


def test_emit_layout(corpus, tmp_path):
    b = run_experiment(_cfg(corpus))
    files = emit_reports(b, tmp_path / "out")
    names = {f.name for f in files}
    assert {"summary.csv", "runs.json", "manifest.json", "thresholds.csv", "selection.json"} <= names
    box = _read_csv((tmp_path / "out" / "boxplot_necost_medium_by_technique.csv").read_text())
    assert list(box[0].keys()) == ["dataset", "metric_set", "LOGR", "MVE"]
    assert len(box) == 2 * 2  # (dataset, metric set) rows
    by_ms = _read_csv((tmp_path / "out" / "boxplot_accuracy_by_metric_set.csv").read_text())
    assert list(by_ms[0].keys()) == ["dataset", "technique", "AM", "SM"]


def test_one_cell_one_row(corpus, tmp_path):
    b = run_experiment(_cfg(corpus, datasets=["alpha"], techniques=["LOGR"], metric_sets=["AM"]))
    emit_reports(b, tmp_path / "one")
    rows = _read_csv((tmp_path / "one" / "summary.csv").read_text())
    assert len(rows) == 1
    assert rows[0]["status"] == "ok"


def test_outputs_parse_and_manifest_covers_rows(corpus, tmp_path):
    b = run_experiment(_cfg(corpus))
    out = tmp_path / "o"
    emit_reports(b, out)
    for p in out.iterdir():
        text = p.read_text()
        if p.suffix == ".json":
            assert json.loads(text) is not None
        else:
            rows = list(csv.reader(io.StringIO(text)))
            assert rows and all(len(r) == len(rows[0]) for r in rows if not p.name.startswith("comparison_"))
    manifest = json.loads((out / "manifest.json").read_text())
    seeds = {(c["dataset"], c["technique"], c["metric_set"]): c["seed_key"] for c in manifest["cells"]}
    for row in _read_csv((out / "summary.csv").read_text()):
        key = (row["dataset"], row["technique"], row["metric_set"])
        assert key in seeds and seeds[key].startswith("3|")
    assert manifest["seed_derivation"]
    assert "workers" not in manifest["config"]
    assert sorted(manifest["files"]) == sorted(p.name for p in out.iterdir())


def test_manifest_replay(corpus, tmp_path):
    cfg = _cfg(corpus)
    emit_reports(run_experiment(cfg), tmp_path / "first")
    replay = ExperimentConfig.from_file(tmp_path / "first" / "manifest.json")
    emit_reports(run_experiment(replay), tmp_path / "second")
    for p in (tmp_path / "first").iterdir():
        assert p.read_bytes() == (tmp_path / "second" / p.name).read_bytes()


def test_bad_dataset_becomes_skip(corpus):
    (corpus / "broken.csv").write_text("DIT,bug\n1,0\n")
    b = run_experiment(_cfg(corpus))
    broken = [c for c in b.cells if c.dataset == "broken"]
    assert len(broken) == 4
    assert all(c.skip_reason is SkipReason.LOAD_ERROR and "DIT" not in c.detail or c.detail for c in broken)
    assert all(c.ok for c in b.cells if c.dataset != "broken")
    assert "broken" in b.dataset_errors


def test_skip_reasons_machine_readable(corpus, tmp_path):
    (corpus / "broken.csv").write_text("DIT,bug\n1,0\n")
    out = tmp_path / "s"
    emit_reports(run_experiment(_cfg(corpus)), out)
    reasons = {r["skip_reason"] for r in _read_csv((out / "summary.csv").read_text())}
    assert reasons <= {""} | {r.value for r in SkipReason}
    assert SkipReason.LOAD_ERROR.value in reasons


def test_unwritable_destination_writes_nothing(corpus, tmp_path):
    b = run_experiment(_cfg(corpus, datasets=["alpha"], techniques=["LOGR"]))
    target = tmp_path / "missing-parent" / "out"
    with pytest.raises(OSError):
        emit_reports(b, target)
    assert not (tmp_path / "missing-parent").exists()


def test_failed_write_keeps_previous_output(corpus, tmp_path, monkeypatch):
    b = run_experiment(_cfg(corpus, datasets=["alpha"], techniques=["LOGR"]))
    out = tmp_path / "keep"
    emit_reports(b, out)
    before = {p.name: p.read_bytes() for p in out.iterdir()}

    import faultpred.experiment as ex

    def boom(bundle):
        raise OSError("disk full")

    monkeypatch.setattr(ex, "render_reports", boom)
    with pytest.raises(OSError):
        emit_reports(b, out)
    assert {p.name: p.read_bytes() for p in out.iterdir()} == before
    assert [p.name for p in tmp_path.iterdir() if p.name.startswith(".keep")] == []


def test_flat_config_parsing(tmp_path):
    text = "data_dir = /x\ntechniques = LOGR, MVE  # two\nk = 5\ninclude-large = yes\nalpha=0.01\n"
    d = parse_flat_config(text)
    assert d == {"data_dir": "/x", "techniques": ["LOGR", "MVE"], "k": 5, "include_large": True, "alpha": 0.01}
    p = tmp_path / "c.txt"
    p.write_text(text)
    assert ExperimentConfig.from_file(p).k == 5
    q = tmp_path / "c.json"
    q.write_text(json.dumps({"k": 7, "seed": 9}))
    assert ExperimentConfig.from_file(q).seed == 9


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(techniques=["SVM"])
    with pytest.raises(ValueError):
        ExperimentConfig(efficiency_scenario="extreme")
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"bogus": 1})
