"""
Per-type evaluation of detector scores against injected ground truth.

For anomaly type ``t`` the population is the type-``t`` cases plus all cases
without a ground-truth label; anomalies of other types are left out so that
a detector's behaviour on them does not leak into type ``t``'s numbers.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from dataclasses import asdict, dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from .data import Dataset, dumps_dataset
from .detectors import DetectorParams, ScoreVector, run_detector
from .errors import DataError
from .injector import GroundTruth
from .taxonomy import AnomalyType

METRICS = ("recall", "precision", "recall_at_k", "rank_auc")


def rank_auc(anomaly_scores: np.ndarray, normal_scores: np.ndarray) -> float:
    """P(random anomaly outscores random normal case); ties count one half."""
    a = np.asarray(anomaly_scores, dtype=np.float64)
    b = np.sort(np.asarray(normal_scores, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        return float("nan")
    below = np.searchsorted(b, a, side="left")
    ties = np.searchsorted(b, a, side="right") - below
    return float((below.sum() + 0.5 * ties.sum()) / (a.size * b.size))


def ranking(case_ids: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Case ids by descending score, ties by ascending case id."""
    order = np.lexsort((case_ids, -scores))
    return case_ids[order]


def recall_at_k(case_ids, scores, positives: Iterable[int], k: int | None = None) -> float:
    positives = set(int(c) for c in positives)
    if not positives:
        return float("nan")
    k = len(positives) if k is None else k
    top = ranking(np.asarray(case_ids, dtype=np.int64), np.asarray(scores, dtype=np.float64))[:k]
    return sum(int(c) in positives for c in top) / len(positives)


@dataclass(frozen=True)
class Metrics:
    n_anomalies: int
    n_normal: int
    k: int
    recall_at_k: float
    rank_auc: float
    recall: float | None = None  # None when the scores carry no flags
    precision: float | None = None

    def to_json(self) -> dict:
        return {k: _round(v) for k, v in asdict(self).items()}


def _round(v):
    if isinstance(v, float):
        return float(f"{v:.12g}")
    return v


def _metrics(ids: np.ndarray, scores: np.ndarray, flags: np.ndarray | None, positive: np.ndarray) -> Metrics:
    n_pos = int(positive.sum())
    recall = precision = None
    if flags is not None:
        hit = int((flags & positive).sum())
        recall = hit / n_pos if n_pos else float("nan")
        n_flag = int(flags.sum())
        precision = hit / n_flag if n_flag else 0.0
    return Metrics(
        n_anomalies=n_pos,
        n_normal=int((~positive).sum()),
        k=n_pos,
        recall_at_k=recall_at_k(ids, scores, ids[positive]),
        rank_auc=rank_auc(scores[positive], scores[~positive]),
        recall=recall,
        precision=precision,
    )


@dataclass
class TypeMetrics:
    detector_id: str
    per_type: dict[AnomalyType, Metrics]
    overall: Metrics | None = None

    def __getitem__(self, t: AnomalyType) -> Metrics:
        return self.per_type[t]


def evaluate_scores(scores: ScoreVector, truth: GroundTruth, dataset: Dataset | None = None) -> TypeMetrics:
    """Recall, precision, recall@K and rank-AUC for every type present in ``truth``."""
    ids = np.sort(np.asarray(dataset.case_ids if dataset is not None else scores.case_ids, dtype=np.int64))
    if dataset is not None:
        truth.check_against(dataset)
    known = set(int(c) for c in scores.case_ids)
    missing = [int(c) for c in ids if int(c) not in known]
    if missing:
        raise DataError(f"scores missing for case ids {missing[:10]}")
    s = scores.aligned(ids)
    flags = None
    if scores.flags is not None:
        pos = {int(c): i for i, c in enumerate(scores.case_ids)}
        flags = np.array([scores.flags[pos[int(c)]] for c in ids], dtype=bool)
    labels = {e.case_id: e.type for e in truth.entries}
    typed = np.array([labels.get(int(c)) for c in ids], dtype=object)
    normal = np.array([t is None for t in typed])
    per_type = {}
    for t in sorted(set(labels.values())):
        keep = normal | (typed == t)
        per_type[t] = _metrics(ids[keep], s[keep], None if flags is None else flags[keep], (typed == t)[keep])
    overall = _metrics(ids, s, flags, ~normal) if labels else None
    return TypeMetrics(scores.detector_id, per_type, overall)


def benchmark_id(dataset: Dataset) -> str:
    return hashlib.sha256(dumps_dataset(dataset).encode()).hexdigest()[:16]


@dataclass
class EvaluationReport:
    benchmark: str
    rows: list[tuple[str, AnomalyType, Metrics]] = field(default_factory=list)
    overall: dict[str, Metrics] = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def detectors(self) -> list[str]:
        seen = []
        for d, _, _ in self.rows:
            if d not in seen:
                seen.append(d)
        return seen

    def types(self) -> list[AnomalyType]:
        return sorted({t for _, t, _ in self.rows})

    def get(self, detector: str, t: AnomalyType) -> Metrics:
        for d, tt, m in self.rows:
            if d == detector and tt is t:
                return m
        raise KeyError((detector, t))

    def add(self, result: TypeMetrics) -> None:
        for t, m in sorted(result.per_type.items()):
            self.rows.append((result.detector_id, t, m))
        if result.overall is not None:
            self.overall[result.detector_id] = result.overall

    def to_json(self) -> dict:
        return {
            "benchmark": self.benchmark,
            "params": self.params,
            "rows": [{"detector": d, "type": t.value, **m.to_json()} for d, t, m in self.rows],
            "overall": {d: m.to_json() for d, m in self.overall.items()},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EvaluationReport":
        rows = []
        for r in obj.get("rows", []):
            r = dict(r)
            d, t = r.pop("detector"), AnomalyType.parse(r.pop("type"))
            rows.append((d, t, Metrics(**r)))
        overall = {d: Metrics(**m) for d, m in obj.get("overall", {}).items()}
        return cls(obj.get("benchmark", ""), rows, overall, obj.get("params", {}))

    def write_json(self, fh: IO[str]) -> None:
        json.dump(self.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")

    def write_csv(self, fh: IO[str]) -> None:
        """Flat ``detector,type,metric,value`` rows; ``type`` is ``all`` for pooled metrics."""
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["detector", "type", "metric", "value"])
        rows = [(d, t.value, m) for d, t, m in self.rows] + [(d, "all", m) for d, m in self.overall.items()]
        for d, t, m in rows:
            for name in ("n_anomalies", "k") + METRICS:
                v = getattr(m, name)
                w.writerow([d, t, name, "" if v is None else _fmt(v)])

    def table(self, metric: str = "rank_auc") -> str:
        """Fixed-width detector x type table of one metric."""
        if metric not in METRICS:
            raise ValueError(f"unknown metric {metric!r}; choose from {', '.join(METRICS)}")
        types = self.types()
        dets = self.detectors()
        width = max([8, *(len(d) for d in dets)])
        head = f"{metric:<{width}}" + "".join(f"{t.value:>8}" for t in types)
        lines = [head, "-" * len(head)]
        for d in dets:
            cells = []
            for t in types:
                try:
                    v = getattr(self.get(d, t), metric)
                except KeyError:
                    v = None
                cells.append(f"{'-' if v is None else f'{v:.3f}':>8}")
            lines.append(f"{d:<{width}}" + "".join(cells))
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    return f"{v:.12g}" if isinstance(v, float) else str(v)


def cross_matrix(
    detector_ids: Sequence[str],
    benchmark: tuple[Dataset, GroundTruth],
    params: DetectorParams | None = None,
) -> EvaluationReport:
    """Run every detector on the benchmark and evaluate it per type."""
    dataset, truth = benchmark
    params = params or truth.detector_params()
    report = EvaluationReport(benchmark_id(dataset), params=params.to_dict())
    for det in detector_ids:
        report.add(evaluate_scores(run_detector(det, dataset, params), truth, dataset))
    return report


def load_external_scores(source: IO[str] | str, case_ids: Iterable[int] | None = None) -> ScoreVector:
    """Read ``case_id,score`` CSV produced by any detector.

    A leading ``# detector: <name>`` line sets the detector id; otherwise the
    file stem (or ``external``) is used. With ``case_ids`` given, the file must
    cover exactly those ids.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8", newline="") as fh:
            text = fh.read()
        name = os.path.splitext(os.path.basename(str(source)))[0]
    else:
        text, name = source.read(), "external"
    lines = text.splitlines()
    if lines and lines[0].startswith("#"):
        meta = lines.pop(0).lstrip("#").strip()
        if meta.lower().startswith("detector:"):
            name = meta.split(":", 1)[1].strip() or name
    reader = csv.reader(io.StringIO("\n".join(lines)))
    header = next(reader, None)
    if header is None or [h.strip() for h in header[:2]] != ["case_id", "score"]:
        raise DataError("score file must start with header 'case_id,score'")
    ids, scores, seen = [], [], set()
    for r, row in enumerate(reader, start=1):
        if not row:
            continue
        try:
            cid = int(row[0])
        except (ValueError, IndexError):
            raise DataError(f"row {r}: invalid case_id {row[:1]!r}") from None
        try:
            s = float(row[1])
        except (ValueError, IndexError):
            raise DataError(f"row {r}: non-numeric score for case_id {cid}") from None
        if not np.isfinite(s):
            raise DataError(f"row {r}: non-finite score for case_id {cid}")
        if cid in seen:
            raise DataError(f"duplicate case_id {cid}")
        seen.add(cid)
        ids.append(cid)
        scores.append(s)
    if case_ids is not None:
        expected = set(int(c) for c in case_ids)
        extra = sorted(seen - expected)
        if extra:
            raise DataError(f"unknown case_id {extra[0]}" + (f" (and {len(extra) - 1} more)" if len(extra) > 1 else ""))
        missing = sorted(expected - seen)
        if missing:
            raise DataError(f"missing case_id {missing[0]}" + (f" (and {len(missing) - 1} more)" if len(missing) > 1 else ""))
    return ScoreVector(name, np.array(ids, dtype=np.int64), np.array(scores, dtype=np.float64))
