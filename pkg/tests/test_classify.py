import json

import numpy as np
import pytest

from anomtypes.classify import classify_case, classify_cases
from anomtypes.data import Dataset, Schema
from anomtypes.detectors import DetectorParams
from anomtypes.taxonomy import AnomalyType as T

DOGS = Schema.of(("sex", "categorical"), ("age", "categorical"), ("status", "categorical"))


def dogs():
    rows = (
        [("MALE", "ADULT", "NORMAL")] * 25
        + [("FEMALE", "ADULT", "PREGNANT")] * 10
        + [("FEMALE", "ADULT", "NORMAL")] * 15
        + [("MALE", "PUPPY", "NORMAL")] * 12
        + [("FEMALE", "PUPPY", "NORMAL")] * 12
        + [("MALE", "PUPPY", "PREGNANT")]
    )
    return Dataset.from_rows(DOGS, rows)


def mixed_table():
    rng = np.random.default_rng(3)
    n = 60
    x = rng.normal(0, 1, n)
    color = np.array(["red", "blue"] * (n // 2), dtype=object)
    x[5], color[5] = 40.0, "green"  # extreme and unique
    x[6] = -40.0  # extreme only
    color[7] = "gold"  # unique only
    return Dataset(Schema.of(("x", "continuous"), ("color", "categorical")), {"x": x, "color": color})


def test_dog_record_is_multidim_rare_class():
    ds = dogs()
    a = classify_case(ds, len(ds) - 1, DetectorParams(c_rare=1, tau_rare=0.05))
    assert a.primary_type is T.MULTIDIM_RARE_CLASS
    assert {e.check for e in a.evidence} == {"rare_combination"}


def test_univariate_precedence():
    params = DetectorParams(c_rare=1, tau_rare=0.02, k_nn=5)
    got = {a.case_id: a.primary_type for a in classify_cases(mixed_table(), [5, 6, 7], params)}
    assert got == {5: T.SIMPLE_MIXED, 6: T.EXTREME_VALUE, 7: T.RARE_CLASS}


def test_normal_case_has_no_evidence():
    a = classify_case(dogs(), 0, DetectorParams(c_rare=1, tau_rare=0.05))
    assert a.primary_type is None and a.evidence == ()
    assert a.to_json()["type"] == "none"


def test_batch_matches_single_and_serializes():
    ds, params = mixed_table(), DetectorParams(c_rare=1, tau_rare=0.02, k_nn=5)
    batch = classify_cases(ds, params=params)
    for a in batch[:10]:
        assert classify_case(ds, a.case_id, params) == a
    doc = json.loads(json.dumps([a.to_json() for a in batch]))
    assert doc[5]["type"] == "III"


def test_multi_label_lists_all_firing_types():
    a = classify_case(mixed_table(), 5, DetectorParams(c_rare=1, tau_rare=0.02, k_nn=5), multi_label=True)
    assert a.primary_type is T.SIMPLE_MIXED
    assert T.SIMPLE_MIXED in a.types


def test_unknown_case_id():
    with pytest.raises(KeyError):
        classify_case(dogs(), 999)
