import json
import statistics

import pytest
from scipy.stats import spearmanr

from metric_freedom.cli import exit_code_for, main
from metric_freedom.errors import ConstantSeries, GridUnderfull, KeyMismatch, NoMixedQuestions
from metric_freedom.records import group_by_question, read_run_records

# frozen from an independent scipy recomputation of the 6x6 fixture
GOLDEN_F_6x6 = 0.3553416287796958


def run(tmp_path, *argv):
    return main([*argv, "--output-dir", str(tmp_path)])


def scipy_question_median(path):
    rs = []
    for g in group_by_question(read_run_records(path)):
        labels, scores = [r.output.value for r in g.runs], g.scores
        if len(set(scores)) < 2:
            continue
        beh, sc = [], []
        for i in range(len(labels)):
            for j in range(i + 1, len(labels)):
                beh.append(float(labels[i] != labels[j]))
                sc.append(abs(scores[i] - scores[j]))
        if len(set(beh)) < 2:
            continue
        rs.append(spearmanr(beh, sc)[0])
    return 1 - statistics.median(rs)


def test_compute_freedom_oracle(tmp_path, fixtures):
    path = fixtures / "runs_6x6.jsonl"
    assert run(tmp_path, "compute-freedom", "--input", str(path)) == 0
    doc = json.loads((tmp_path / "freedom.json").read_text())
    F = doc["results"][0]["F"]
    assert F == pytest.approx(scipy_question_median(path), abs=1e-12)
    assert F == pytest.approx(GOLDEN_F_6x6, abs=1e-12)
    assert doc["header"]["seed"] == 42 and len(doc["header"]["input_sha256"]) == 64


def test_compute_freedom_csv_and_dataset(tmp_path, fixtures):
    path = str(fixtures / "runs_6x6.jsonl")
    assert run(tmp_path, "compute-freedom", "--input", path, "--aggregation", "dataset",
               "--format", "csv") == 0
    text = (tmp_path / "freedom.csv").read_text()
    assert text.startswith("# tool=metric-freedom\n")
    assert "dataset" in text


def test_exit_codes(tmp_path, fixtures, capsys):
    assert run(tmp_path, "compute-freedom", "--input", str(fixtures / "all_correct.jsonl")) == 3
    assert "excluded" in capsys.readouterr().out
    assert run(tmp_path, "compute-freedom", "--input", str(tmp_path / "missing.jsonl")) == 2
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"dataset_id": 1}\n')
    assert run(tmp_path, "compute-freedom", "--input", str(bad)) == 2
    assert run(tmp_path, "compute-freedom") == 2
    grid = str(fixtures / "grid_10x12.jsonl")
    assert run(tmp_path, "sweep", "--input", grid, "--M-list", "11", "--N-list", "3",
               "--cost-per-run", "1") == 4


def test_sweep_outputs(tmp_path, fixtures):
    grid = str(fixtures / "grid_10x12.jsonl")
    assert run(tmp_path, "sweep", "--input", grid, "--M-list", "2,6", "--N-list", "2,6",
               "--cost-per-run", "0.17", "--trials", "4", "--format", "csv") == 0
    rows = [l for l in (tmp_path / "sweep.csv").read_text().splitlines() if not l.startswith("#")]
    assert rows[0] == "M,N,F_hat,cost,status"
    assert "6,6," in "\n".join(rows) and any(r.startswith("6,6,") and ",6.12,OK" in r for r in rows)
    assert all(r.endswith("TOO_FEW_RUNS") for r in rows[1:] if r.split(",")[1] == "2")
    svg = (tmp_path / "sweep.svg").read_text()
    assert svg.count('fill="#bdbdbd"') == 2
    assert 'stroke="#d62728"' in svg
    assert "href" not in svg


def test_lift_correlate(tmp_path, fixtures):
    assert run(tmp_path, "lift-correlate", "--table", str(fixtures / "published_lift_rows.json")) == 0
    doc = json.loads((tmp_path / "lift.json").read_text())
    assert len(doc["rows"]) == 13
    assert doc["correlation"]["pearson_r"] <= -0.6
    assert doc["correlation"]["permutation_p"] < 0.05
    assert "<line" in (tmp_path / "lift_scatter.svg").read_text()


def _table(tmp_path, rows):
    p = tmp_path / "t.json"
    p.write_text(json.dumps(rows))
    return str(p)


def test_lift_two_rows_and_constant(tmp_path):
    rows = [dict(task="t", dataset=f"d{i}", metric="m", F=0.1 * i, baseline=0.5, skilled=0.6)
            for i in range(2)]
    assert run(tmp_path, "lift-correlate", "--table", _table(tmp_path, rows)) == 0
    doc = json.loads((tmp_path / "lift.json").read_text())
    assert doc["correlation"]["pearson_r"] is None and len(doc["rows"]) == 2
    const = [dict(task="t", dataset=f"d{i}", metric="m", F=0.5, baseline=0.5, lift=0.01 * i)
             for i in range(4)]
    assert run(tmp_path, "lift-correlate", "--table", _table(tmp_path, const)) == 5


def test_lift_duplicate_rows_is_input_error(tmp_path):
    rows = [dict(task="t", dataset="d", metric="m", F=0.1, baseline=0.5, skilled=0.6)] * 2
    assert run(tmp_path, "lift-correlate", "--table", _table(tmp_path, rows)) == 2


def test_exit_code_mapping():
    assert exit_code_for(KeyMismatch("x")) == 2
    assert exit_code_for(ConstantSeries("x")) == 5
    assert exit_code_for(NoMixedQuestions("x")) == 3
    assert exit_code_for(GridUnderfull("x")) == 4


def test_sim_landscape(tmp_path):
    assert run(tmp_path, "sim-landscape", "--target-F", "0", "--n-eval", "2000",
               "--format", "csv") == 0
    lines = (tmp_path / "landscape.csv").read_text().splitlines()
    assert lines[-1].endswith("true")
    assert run(tmp_path, "sim-landscape", "--W", "0") == 2


def test_sim_iterator(tmp_path, capsys):
    assert run(tmp_path, "sim-iterator", "--lambda", "0.04", "--seeds", "5") == 0
    out = capsys.readouterr().out
    assert "CONVERGED=5" in out and "convergence_condition=true" in out
    assert run(tmp_path, "sim-iterator", "--lambda", "0", "--T", "0", "--seeds", "2",
               "--format", "csv") == 0
    assert "BUDGET" in (tmp_path / "iterator_summary.csv").read_text()
