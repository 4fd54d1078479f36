import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from anomtypes.data import Dataset, Schema
from anomtypes.detectors import ScoreVector
from anomtypes.errors import DataError
from anomtypes.evaluation import (
    EvaluationReport,
    cross_matrix,
    evaluate_scores,
    load_external_scores,
    rank_auc,
    ranking,
    recall_at_k,
)
from anomtypes.injector import GroundTruth, TruthEntry
from anomtypes.taxonomy import AnomalyType as T

N = 50
IDS = np.arange(N)
FOURS = list(range(40, 50))
TRUTH = GroundTruth([TruthEntry(c, T.MULTIDIM_NUMERICAL, ("x", "y")) for c in FOURS])
DS = Dataset(Schema.of(("x", "continuous")), {"x": np.zeros(N)})


def _scores(values, flags=None):
    return ScoreVector("det", IDS, np.asarray(values, dtype=float), flags)


def test_perfect_constant_inverted():
    perfect = (IDS >= 40).astype(float)
    m = evaluate_scores(_scores(perfect), TRUTH, DS)[T.MULTIDIM_NUMERICAL]
    assert (m.rank_auc, m.recall_at_k, m.k) == (1.0, 1.0, 10)
    m = evaluate_scores(_scores(np.ones(N)), TRUTH, DS)[T.MULTIDIM_NUMERICAL]
    assert m.rank_auc == 0.5
    m = evaluate_scores(_scores(-perfect), TRUTH, DS)[T.MULTIDIM_NUMERICAL]
    assert m.rank_auc == 0.0 and m.recall_at_k == 0.0


def test_recall_at_k_ties_break_by_case_id():
    # all tied: the top 10 are ids 0..9, none injected
    assert recall_at_k(IDS, np.ones(N), FOURS) == 0.0
    assert ranking(np.array([5, 2, 9]), np.array([1.0, 1.0, 2.0])).tolist() == [9, 2, 5]


def test_threshold_metrics():
    flags = np.zeros(N, dtype=bool)
    flags[[40, 41, 0]] = True
    m = evaluate_scores(_scores(np.zeros(N), flags), TRUTH, DS)[T.MULTIDIM_NUMERICAL]
    assert m.recall == pytest.approx(0.2)
    assert m.precision == pytest.approx(2 / 3)
    none = evaluate_scores(_scores(np.zeros(N), np.zeros(N, bool)), TRUTH, DS)[T.MULTIDIM_NUMERICAL]
    assert (none.recall, none.precision) == (0.0, 0.0)


def test_other_types_are_excluded_from_a_type_population():
    ones = GroundTruth([TruthEntry(c, T.EXTREME_VALUE, ("x",)) for c in range(5)])
    both = TRUTH.merged(ones)
    s = np.r_[np.full(5, 9.0), np.zeros(35), np.ones(10)]
    alone = evaluate_scores(_scores(s), TRUTH, DS)[T.MULTIDIM_NUMERICAL]
    mixed = evaluate_scores(_scores(s), both, DS)[T.MULTIDIM_NUMERICAL]
    assert alone.rank_auc < 1.0
    assert mixed.rank_auc == 1.0 and mixed.n_normal == 35


def test_missing_scores():
    with pytest.raises(DataError, match="missing"):
        evaluate_scores(ScoreVector("d", IDS[:-1], np.zeros(N - 1)), TRUTH, DS)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.integers(-5, 5), min_size=1, max_size=20),
    st.lists(st.integers(-5, 5), min_size=1, max_size=20),
)
def test_rank_auc_matches_oracle(pos, neg):
    assert rank_auc(np.array(pos), np.array(neg)) == pytest.approx(oracles.rank_auc(pos, neg), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=4, max_size=40, unique=True), st.integers(1, 3))
def test_negation_is_complementary(values, n_pos):
    s = np.array(values)
    a, b = s[:n_pos], s[n_pos:]
    assert rank_auc(a, b) + rank_auc(-a, -b) == pytest.approx(1.0)


def test_cross_matrix_empty_and_constant(benchmark):
    ds, truth = benchmark
    assert cross_matrix([], (ds, truth)).rows == []
    report = EvaluationReport("b")
    report.add(evaluate_scores(ScoreVector("flat", ds.case_ids, np.zeros(len(ds))), truth, ds))
    assert {m.rank_auc for _, _, m in report.rows} == {0.5}
    assert len(report.rows) == 6


def test_report_serialization():
    report = EvaluationReport("bench", params={"k_nn": 3})
    report.add(evaluate_scores(_scores((IDS >= 40).astype(float)), TRUTH, DS))
    doc = json.loads(json.dumps(report.to_json()))
    again = EvaluationReport.from_json(doc)
    assert again.to_json() == report.to_json()
    buf = io.StringIO()
    report.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "detector,type,metric,value"
    assert "det,IV,rank_auc,1" in lines
    assert "det,all,rank_auc,1" in lines
    assert "IV" in report.table()
    with pytest.raises(ValueError):
        report.table("f1")


def _external(text):
    return load_external_scores(io.StringIO(text), case_ids=[1, 2, 7])


def test_external_scores():
    sv = _external("# detector: iforest\ncase_id,score\n1,0.5\n2,0.1\n7,0.9\n")
    assert sv.detector_id == "iforest" and sv.flags is None
    assert sv.as_mapping() == {1: 0.5, 2: 0.1, 7: 0.9}


@pytest.mark.parametrize(
    "body, match",
    [
        ("1,0.5\n7,0.2\n2,0.1\n7,0.9\n", "duplicate case_id 7"),
        ("1,0.5\n2,0.1\n7,0.9\n8,0.0\n", "unknown case_id 8"),
        ("1,0.5\n7,0.9\n", "missing case_id 2"),
        ("1,0.5\n2,abc\n7,0.9\n", "non-numeric"),
    ],
)
def test_external_score_errors(body, match):
    with pytest.raises(DataError, match=match):
        _external("case_id,score\n" + body)


def test_external_scores_evaluate_rank_metrics_only():
    text = "case_id,score\n" + "".join(f"{c},{int(c >= 40)}\n" for c in IDS)
    sv = load_external_scores(io.StringIO(text), IDS)
    m = evaluate_scores(sv, TRUTH, DS)[T.MULTIDIM_NUMERICAL]
    assert m.rank_auc == 1.0 and m.recall is None and m.precision is None
