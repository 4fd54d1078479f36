import json
import os

import pytest

from anomtypes.cli import main

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
BASE_SPEC = os.path.join(ROOT, "configs", "two_cluster_base.json")
INJ_SPEC = os.path.join(ROOT, "configs", "injection.json")


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def bench(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("generate", "--spec", BASE_SPEC, "--n", 300, "--seed", 1, "-o", d) == 0
    assert run("inject", "--data", d / "base.csv", "--spec", INJ_SPEC, "--count", 2, "-o", d) == 0
    return d


def test_generate_outputs(bench):
    assert (bench / "base.csv").exists() and (bench / "base.schema.json").exists()
    assert (bench / "benchmark.csv").read_text().count("\n") == 1 + 300 + 12
    truth = json.loads((bench / "truth.json").read_text())
    assert len(truth["entries"]) == 12


def test_detect_classify_evaluate_report(bench, capsys):
    data = bench / "benchmark.csv"
    assert run("detect", "--data", data, "--detector", "type1,type4", "--truth", bench / "truth.json", "-o", bench) == 0
    assert (bench / "scores_type4.csv").read_text().startswith("case_id,score,flag\n")
    assert json.loads((bench / "scores_type4.params.json").read_text())["detector_id"] == "type4"
    assert run("classify", "--data", data, "--truth", bench / "truth.json", "--truth-only", "-o", bench) == 0
    assert len(json.loads((bench / "classification.json").read_text())) == 12
    assert run("evaluate", "--data", data, "--truth", bench / "truth.json", "-o", bench) == 0
    report = json.loads((bench / "report.json").read_text())
    assert {r["detector"] for r in report["rows"]} == {f"type{i}" for i in range(1, 7)}
    capsys.readouterr()
    assert run("report", "--report", bench / "report.json", "--metric", "rank_auc") == 0
    assert "type6" in capsys.readouterr().out


def test_plot(bench):
    assert run("plot", "--data", bench / "benchmark.csv", "--x", "x", "--y", "y", "--class-attr", "color",
               "--truth", bench / "truth.json", "-o", bench) == 0
    assert (bench / "plot.svg").read_text().startswith("<svg")


def test_external_scores_missing_id(bench, tmp_path, capsys):
    ext = tmp_path / "ext.csv"
    ext.write_text("case_id,score\n" + "".join(f"{i},0.5\n" for i in range(1, 312)))
    code = run("evaluate", "--data", bench / "benchmark.csv", "--truth", bench / "truth.json", "--scores", ext)
    assert code == 2
    assert "missing case_id 0" in capsys.readouterr().err


def test_knn_precondition_exits_2(tmp_path, capsys):
    assert run("generate", "--spec", BASE_SPEC, "--n", 100, "-o", tmp_path) == 0
    assert run("detect", "--data", tmp_path / "base.csv", "--detector", "type4", "--knn", 2000) == 2
    assert "k_nn" in capsys.readouterr().err


def test_usage_errors_exit_1(tmp_path, capsys):
    assert run("generate", "--bogus") == 1
    assert run("frobnicate") == 1
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"not_a_flag": 1}')
    assert run("generate", "--config", cfg, "--spec", BASE_SPEC) == 1


def test_data_errors_exit_2(tmp_path):
    assert run("detect", "--data", tmp_path / "nope.csv", "--detector", "type1") == 2
    assert run("detect", "--data", tmp_path / "nope.csv", "--detector", "foo") == 2


def test_config_flags_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"spec": BASE_SPEC, "n": 50, "seed": 3}))
    assert run("generate", "--config", cfg, "--n", 20, "-o", tmp_path) == 0
    assert (tmp_path / "base.csv").read_text().count("\n") == 21


def test_generate_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run("generate", "--spec", BASE_SPEC, "--seed", 42, "--n", 200, "-o", d) == 0
    assert (a / "base.csv").read_bytes() == (b / "base.csv").read_bytes()


def test_series_pipeline(tmp_path):
    assert run("generate", "--kind", "series", "--n", 80, "--period", 8, "--amplitude", 2, "-o", tmp_path) == 0
    assert run("inject", "--data", tmp_path / "series.csv", "--variant", "level_shift", "--t0", 40,
               "--magnitude", 5, "-o", tmp_path) == 0
    assert run("transform", "difference", "--data", tmp_path / "series.csv", "-o", tmp_path) == 0
    assert (tmp_path / "difference.csv").read_text().count("\n") == 80
    assert run("transform", "segment", "--data", tmp_path / "series.csv", "--period", 8, "-o", tmp_path) == 0
    assert (tmp_path / "cycles.csv").read_text().count("\n") == 11
    sym = tmp_path / "phases.txt"
    sym.write_text("\n".join("p1 p2 p3 p1 p2 p3 p1 p3 p1 p2 p3".split()) + "\n")
    assert run("transform", "windowize", "--symbols", sym, "--width", 2, "-o", tmp_path) == 0
    assert (tmp_path / "windows.csv").read_text().count("\n") == 11
