import csv
import json
import subprocess
import sys

import numpy as np
import pytest

import ctpi.bench
from ctpi.bench import COLUMNS, CaseSpec, EngineDisagreement, run_benchmark
from ctpi.cli import main
from ctpi.generator import six_node_network, preset
from ctpi.inference import QueryResult
from ctpi.netfile import write_network
from ctpi.network import brute_posterior


@pytest.fixture
def six(tmp_path):
    path = tmp_path / "six.net"
    write_network(six_node_network(), path)
    return str(path)


def test_zero_cases_gives_empty_report():
    report = run_benchmark([six_node_network()], CaseSpec(0), ("ctpi", "ctp"))
    assert all(r.case == -1 for r in report.rows)
    assert {r.phase for r in report.rows} == {"construction", "initialization"}


def test_six_node_bench_agrees_and_aggregates(tmp_path):
    report = run_benchmark([six_node_network()], CaseSpec(10, (1, 2, 3), seed=4), ("ctp", "ctpi", "ve"))
    path = tmp_path / "r.csv"
    report.write(path)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0].keys()) == COLUMNS
    per_case = [r for r in rows if r["case"] != "-1"]
    assert {int(r["case"]) for r in per_case} == set(range(10))
    for agg in report.aggregates():
        chosen = [r for r in rows if r["engine"] == agg["engine"] and r["phase"] == agg["phase"]]
        assert len(chosen) == agg["cases"]
        assert np.isclose(np.mean([float(r["macc"]) for r in chosen]), agg["macc"])
    jpath = tmp_path / "r.json"
    report.write(jpath)
    doc = json.loads(jpath.read_text())
    assert set(doc["rows"][0]) == set(COLUMNS)


def test_fanin_bench_peak():
    from ctpi.generator import fanin_network
    report = run_benchmark([fanin_network(0)], CaseSpec(2, (3,)), ("ctpi", "ctp"))
    peak = {e: max(r.peak_entries for r in report.rows if r.engine == e) for e in ("ctpi", "ctp")}
    assert peak["ctpi"] < peak["ctp"]


def test_disagreement_aborts_before_rows(monkeypatch):
    def wrong(net, x, evidence=None):
        return QueryResult(x, np.full(net.card(x), 1.0 / net.card(x)), 1.0)

    monkeypatch.setattr(ctpi.bench, "ve_query", wrong)
    with pytest.raises(EngineDisagreement):
        run_benchmark([six_node_network()], CaseSpec(3), ("ctpi", "ve"))


def test_cli_query_matches_oracle(six, capsys):
    assert main(["query", six, "--evidence", "e1=1", "--target", "e3"]) == 0
    out = capsys.readouterr().out.strip()
    assert out.startswith("P(e3 | e1=1) = ")
    values = [float(tok) for tok in out.split() if tok[0].isdigit() and ":" not in tok and "=" not in tok]
    want = brute_posterior(six_node_network(), 5, {3: 1})
    assert np.allclose(values, want, atol=1e-11)


@pytest.mark.parametrize("engine", ["ctpi", "ctp", "ve", "brute"])
def test_cli_engines_agree(six, capsys, engine):
    assert main(["query", six, "--evidence", "e3=0", "--target", "a,e2", "--engine", engine]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2


def test_cli_exit_codes(six, tmp_path, capsys, monkeypatch):
    assert main(["validate", six]) == 0
    assert main(["query", six, "--target", "zz"]) == 2
    assert "'zz'" in capsys.readouterr().err
    bad = tmp_path / "bad.net"
    bad.write_text("var a : 0,1\ncpt a : 0.6 0.6\n")
    assert main(["validate", str(bad)]) == 2
    assert main(["validate", str(tmp_path / "missing.net")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["query", six])
    assert exc.value.code == 1
    monkeypatch.setattr(ctpi.bench, "ve_query",
                        lambda net, x, evidence=None: QueryResult(x, np.ones(net.card(x)) / net.card(x), 1.0))
    assert main(["bench", "--nets", six, "--cases", "2", "--engines", "ctpi,ve"]) == 3


def test_cli_tree(six, capsys):
    assert main(["tree", six]) == 0
    assert capsys.readouterr().out.count("clique") == 4


def test_cli_gen_is_deterministic(tmp_path):
    a, b = tmp_path / "a.net", tmp_path / "b.net"
    assert main(["gen", "--preset", "cpcs2", "-o", str(a)]) == 0
    assert main(["gen", "--preset", "cpcs2", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert main(["gen", "--nodes", "20", "--mean-parents", "1.2", "--frame-sizes", "2,3",
                 "--seed", "5", "-o", str(a)]) == 0
    assert main(["gen", "--nodes", "20", "--mean-parents", "1.2", "--frame-sizes", "2,3",
                 "--seed", "5", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert main(["validate", str(a)]) == 0


def test_cli_bench_writes_csv(tmp_path, capsys):
    out = tmp_path / "b.csv"
    assert main(["bench", "--nets", "cpcs1", "--cases", "2", "--obs", "5", "--out", str(out)]) == 0
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == COLUMNS
    assert all(len(r) == len(COLUMNS) for r in rows)


def test_module_entry_point(six):
    proc = subprocess.run([sys.executable, "-m", "ctpi", "query", six, "--target", "a"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("P(a) = ")


def test_preset_name_resolves():
    assert preset("cpcs1").name == "cpcs1"
