"""
Assign a flagged case to one of the six anomaly types.

Decision procedure, in order:

1. univariate checks per attribute -- extreme/rare value on a continuous
   attribute, rare class on a categorical one. Both kinds -> III, continuous
   only -> I, categorical only -> II.
2. multivariate checks -- local class rarity -> VI; otherwise joint density
   deviation and rare class combinations: both -> VI, density only -> IV,
   combination only -> V.
3. nothing fires -> not anomalous.

Univariate deviance takes precedence: a type IV case by definition has no
extreme value on any participating attribute.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .data import Dataset
from .detectors import (
    DetectorParams,
    Evidence,
    ScoreVector,
    detect_extreme_value,
    detect_multidim_mixed,
    detect_multidim_numerical,
    detect_multidim_rare_class,
    detect_rare_class,
)
from .errors import ParameterError
from .taxonomy import AnomalyType

ClassificationParams = DetectorParams


@dataclass(frozen=True)
class TypeAttribution:
    case_id: int
    primary_type: AnomalyType | None
    evidence: tuple[Evidence, ...] = ()
    order: int | None = None
    types: tuple[AnomalyType, ...] = field(default=())

    def __post_init__(self):
        if self.primary_type is not None and not self.evidence:
            raise ValueError("an anomalous attribution needs evidence")
        if self.order is not None and self.primary_type is not AnomalyType.MULTIDIM_MIXED:
            raise ValueError("order applies to type VI only")

    def to_json(self) -> dict:
        out = {
            "case_id": int(self.case_id),
            "type": self.primary_type.value if self.primary_type else "none",
            "order": self.order,
            "evidence": [e.to_json() for e in self.evidence],
        }
        if self.types:
            out["types"] = [t.value for t in self.types]
        return out


def _applicable(ds: Dataset, params: DetectorParams) -> dict[str, bool]:
    s = ds.schema
    n_cont = len(s.continuous())
    n_cat = len(s.categorical(substantive=True))
    big = len(ds) > params.k_nn
    return {
        "type1": bool(s.continuous(substantive=True)) and len(ds) >= 2,
        "type2": n_cat >= 1,
        "type4": n_cont >= 2 and big,
        "type5": n_cat >= 2,
        "type6": n_cont >= 1 and n_cat >= 1 and big,
    }


def _run_checks(ds: Dataset, params: DetectorParams) -> dict[str, ScoreVector | None]:
    run = _applicable(ds, params)
    fns = {
        "type1": detect_extreme_value,
        "type2": detect_rare_class,
        "type4": detect_multidim_numerical,
        "type5": detect_multidim_rare_class,
        "type6": detect_multidim_mixed,
    }
    return {k: (fns[k](ds, params) if run[k] else None) for k in fns}


def _fired(sv: ScoreVector | None, cid: int) -> bool:
    return sv is not None and sv.flag_of(cid)


def _decide(checks: dict, cid: int, multi_label: bool) -> TypeAttribution:
    T = AnomalyType
    ev = lambda key: tuple(checks[key].evidence.get(cid, ())) if checks[key] is not None else ()
    f = {k: _fired(sv, cid) for k, sv in checks.items()}
    types = ()
    if multi_label:
        raw = [
            (f["type1"] and f["type2"], T.SIMPLE_MIXED),
            (f["type1"], T.EXTREME_VALUE),
            (f["type2"], T.RARE_CLASS),
            (f["type4"], T.MULTIDIM_NUMERICAL),
            (f["type5"], T.MULTIDIM_RARE_CLASS),
            (f["type6"], T.MULTIDIM_MIXED),
        ]
        types = tuple(sorted({t for hit, t in raw if hit}))

    def attribution(t, evidence, order=None):
        return TypeAttribution(cid, t, evidence, order, types)

    if f["type1"] and f["type2"]:
        return attribution(T.SIMPLE_MIXED, ev("type1") + ev("type2"))
    if f["type1"]:
        return attribution(T.EXTREME_VALUE, ev("type1"))
    if f["type2"]:
        return attribution(T.RARE_CLASS, ev("type2"))
    if f["type6"]:
        local = ev("type6")
        return attribution(T.MULTIDIM_MIXED, local, min(e.order for e in local))
    if f["type4"] and f["type5"]:
        combo = ev("type5")
        return attribution(T.MULTIDIM_MIXED, ev("type4") + combo, min(len(e.attributes) for e in combo))
    if f["type4"]:
        return attribution(T.MULTIDIM_NUMERICAL, ev("type4"))
    if f["type5"]:
        return attribution(T.MULTIDIM_RARE_CLASS, ev("type5"))
    return attribution(None, ())


def classify_cases(
    dataset: Dataset,
    case_ids: Iterable[int] | None = None,
    params: DetectorParams | None = None,
    *,
    multi_label: bool = False,
) -> list[TypeAttribution]:
    """Classify several cases, running each check once over the whole dataset."""
    params = params or DetectorParams()
    if not isinstance(params, DetectorParams):
        raise ParameterError("params must be a DetectorParams instance")
    ds = dataset.sorted_by_id()
    ids = [int(c) for c in (ds.case_ids if case_ids is None else case_ids)]
    for cid in ids:
        ds.position(cid)  # KeyError for unknown ids
    checks = _run_checks(ds, params)
    return [_decide(checks, cid, multi_label) for cid in ids]


def classify_case(
    dataset: Dataset,
    case_id: int,
    params: DetectorParams | None = None,
    *,
    multi_label: bool = False,
) -> TypeAttribution:
    return classify_cases(dataset, [case_id], params, multi_label=multi_label)[0]
