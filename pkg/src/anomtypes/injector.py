"""
Simulated base datasets and ground-truth-labelled anomaly injection.

Injected cases are always appended; base cases are never modified. All
constructions are measured against a *reference* dataset (by default the
input itself; :func:`build_benchmark` uses the untouched base) so cases
injected earlier do not shift the rarity/density definitions.

Randomness comes from numpy's ``Generator`` over the PCG64 bit generator,
seeded explicitly; identical specs and seeds give identical output.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from itertools import combinations, product
from typing import IO, Iterable, Sequence

import numpy as np

from .data import Attribute, AttributeKind, Dataset, Schema, column_stats, marginal_stats
from .detectors import DetectorParams, apply_scaling, deviation_scores, knn, robust_center_scale
from .errors import InjectionError, ParameterError
from .taxonomy import AnomalyType

log = logging.getLogger(__name__)

T = AnomalyType


# ---------------------------------------------------------------------------
# base specification
# ---------------------------------------------------------------------------


@dataclass
class ClusterSpec:
    mean: list[float]
    scale: list[float]
    weight: float


@dataclass
class CategoricalSpec:
    """One categorical attribute.

    Exactly one of ``probs`` (unconditional), ``by_cluster`` (one
    distribution per cluster) or ``given`` + ``conditional`` (distribution
    conditional on an earlier categorical attribute) is set.
    """

    name: str
    probs: dict[str, float] | None = None
    by_cluster: list[dict[str, float]] | None = None
    given: str | None = None
    conditional: dict[str, dict[str, float]] | None = None


def _check_dist(where: str, dist: dict) -> None:
    if not dist:
        raise ParameterError(f"{where}: empty label distribution")
    p = np.array(list(dist.values()), dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
        raise ParameterError(f"{where}: probabilities must be >= 0 and sum to 1")


@dataclass
class BaseSpec:
    n_cases: int
    continuous: list[str]
    clusters: list[ClusterSpec]
    categorical: list[CategoricalSpec] = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        self.clusters = [c if isinstance(c, ClusterSpec) else ClusterSpec(**c) for c in self.clusters]
        self.categorical = [
            c if isinstance(c, CategoricalSpec) else CategoricalSpec(**c) for c in self.categorical
        ]
        self.validate()

    def validate(self) -> None:
        if self.n_cases < 0:
            raise ParameterError("n_cases must be >= 0")
        if not self.clusters:
            raise ParameterError("at least one cluster is required")
        d = len(self.continuous)
        weights = np.array([c.weight for c in self.clusters], dtype=float)
        if np.any(weights <= 0) or abs(weights.sum() - 1) > 1e-9:
            raise ParameterError("cluster weights must be positive and sum to 1")
        for i, c in enumerate(self.clusters):
            if len(c.mean) != d or len(c.scale) != d:
                raise ParameterError(f"cluster {i}: mean/scale length must equal {d}")
            if any(s <= 0 for s in c.scale):
                raise ParameterError(f"cluster {i}: scales must be > 0")
        names = list(self.continuous)
        for cat in self.categorical:
            modes = [cat.probs is not None, cat.by_cluster is not None, cat.given is not None]
            if sum(modes) != 1:
                raise ParameterError(f"{cat.name}: set exactly one of probs, by_cluster, given")
            if cat.probs is not None:
                _check_dist(cat.name, cat.probs)
            elif cat.by_cluster is not None:
                if len(cat.by_cluster) != len(self.clusters):
                    raise ParameterError(f"{cat.name}: need one distribution per cluster")
                for j, dist in enumerate(cat.by_cluster):
                    _check_dist(f"{cat.name}[cluster {j}]", dist)
            else:
                if cat.given not in names or cat.given in self.continuous:
                    raise ParameterError(f"{cat.name}: 'given' must name an earlier categorical attribute")
                for lab, dist in (cat.conditional or {}).items():
                    _check_dist(f"{cat.name}[{cat.given}={lab}]", dist)
            names.append(cat.name)
        if len(set(names)) != len(names):
            raise ParameterError("attribute names must be unique")

    def schema(self) -> Schema:
        attrs = [Attribute(n, AttributeKind.CONTINUOUS) for n in self.continuous]
        attrs += [Attribute(c.name, AttributeKind.CATEGORICAL) for c in self.categorical]
        return Schema(tuple(attrs))

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "BaseSpec":
        return cls(**obj)


def _draw_labels(rng: np.random.Generator, dist: dict[str, float], size: int) -> np.ndarray:
    labels = list(dist)
    picks = rng.choice(len(labels), size=size, p=np.array([dist[k] for k in labels], dtype=float))
    return np.array(labels, dtype=object)[picks]


def sample_base(spec: BaseSpec) -> tuple[Dataset, np.ndarray]:
    """Generate the base set and return it with each case's cluster index."""
    rng = np.random.default_rng(spec.seed)
    n, d = spec.n_cases, len(spec.continuous)
    weights = np.array([c.weight for c in spec.clusters], dtype=float)
    cluster = rng.choice(len(spec.clusters), size=n, p=weights / weights.sum())
    means = np.array([c.mean for c in spec.clusters], dtype=float).reshape(-1, d)
    scales = np.array([c.scale for c in spec.clusters], dtype=float).reshape(-1, d)
    X = rng.standard_normal((n, d)) * scales[cluster] + means[cluster]
    columns: dict[str, np.ndarray] = {nm: X[:, j] for j, nm in enumerate(spec.continuous)}
    for cat in spec.categorical:
        col = np.empty(n, dtype=object)
        if cat.probs is not None:
            col[:] = _draw_labels(rng, cat.probs, n)
        else:
            if cat.by_cluster is not None:
                keys, groups = range(len(spec.clusters)), cluster
                table = dict(enumerate(cat.by_cluster))
            else:
                parent = columns[cat.given]
                keys, groups = sorted(set(parent)), parent
                table = cat.conditional or {}
            for key in keys:
                rows = np.flatnonzero(groups == key)
                if rows.size == 0:
                    continue
                if key not in table:
                    raise ParameterError(f"{cat.name}: no distribution for {cat.given}={key!r}")
                col[rows] = _draw_labels(rng, table[key], rows.size)
        columns[cat.name] = col
    return Dataset(spec.schema(), columns), cluster


def generate_base(spec: BaseSpec) -> Dataset:
    return sample_base(spec)[0]


# ---------------------------------------------------------------------------
# injection specification and ground truth
# ---------------------------------------------------------------------------


@dataclass
class InjectionSpec:
    """Per-type counts plus the knobs of each construction.

    ``thresholds`` are the detection thresholds the constructions are
    checked against; classifying the result with the same thresholds is
    what "matched parameters" means.
    """

    counts: dict[AnomalyType, int] = field(default_factory=dict)
    extremity: float = 5.0  # m: distance from the center in units of scale (I, III)
    extreme_mode: str = "extreme"  # "extreme" or "mid_range" (I)
    extreme_attributes: int = 1
    rarity_mode: str = "new"  # "new" label or "reuse" a low-count label (II, III)
    band: tuple[float, float] = (0.05, 0.95)  # marginal quantile band (IV)
    isolation: float = 2.0  # IV score must exceed isolation x base (1 - epsilon) quantile
    tuple_rule: str = "random"  # "random" or "first" zero-count tuple (V)
    order: int = 1  # VI
    retry_budget: int = 10_000
    thresholds: DetectorParams = field(default_factory=DetectorParams)
    seed: int = 0

    def __post_init__(self):
        self.counts = {AnomalyType.parse(k) if not isinstance(k, AnomalyType) else k: int(v)
                       for k, v in self.counts.items()}
        if isinstance(self.thresholds, dict):
            self.thresholds = DetectorParams.from_dict(self.thresholds)
        self.band = tuple(self.band)
        if any(c < 0 for c in self.counts.values()):
            raise ParameterError("counts must be >= 0")
        q_lo, q_hi = self.band
        if not 0 <= q_lo < q_hi <= 1:
            raise ParameterError("band must satisfy 0 <= q_lo < q_hi <= 1")
        if not self.extremity > 0:
            raise ParameterError("extremity must be > 0")
        if self.extreme_mode not in ("extreme", "mid_range"):
            raise ParameterError(f"unknown extreme_mode {self.extreme_mode!r}")
        if self.rarity_mode not in ("new", "reuse"):
            raise ParameterError(f"unknown rarity_mode {self.rarity_mode!r}")
        if self.tuple_rule not in ("random", "first"):
            raise ParameterError(f"unknown tuple_rule {self.tuple_rule!r}")
        if self.order < 1:
            raise ParameterError("order must be >= 1")
        if self.isolation < 1:
            raise ParameterError("isolation must be >= 1")
        if self.retry_budget < 1:
            raise ParameterError("retry_budget must be >= 1")

    def count(self, t: AnomalyType) -> int:
        return self.counts.get(t, 0)

    def to_json(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["counts"] = {t.value: c for t, c in sorted(self.counts.items())}
        out["band"] = list(self.band)
        out["thresholds"] = self.thresholds.to_dict()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "InjectionSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ParameterError(f"unknown injection spec fields: {sorted(unknown)}")
        return cls(**obj)


@dataclass(frozen=True)
class TruthEntry:
    case_id: int
    type: AnomalyType
    attributes: tuple[str, ...]
    order: int | None = None
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "case_id": self.case_id,
            "type": self.type.value,
            "attributes": list(self.attributes),
            "order": self.order,
            "params": self.params,
        }


@dataclass
class GroundTruth:
    entries: list[TruthEntry] = field(default_factory=list)
    thresholds: dict | None = None

    def __post_init__(self):
        ids = [e.case_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ParameterError("ground-truth case ids must be distinct")

    def __len__(self):
        return len(self.entries)

    def ids(self) -> list[int]:
        return [e.case_id for e in self.entries]

    def type_of(self, case_id: int) -> AnomalyType | None:
        for e in self.entries:
            if e.case_id == case_id:
                return e.type
        return None

    def by_type(self) -> dict[AnomalyType, list[int]]:
        out: dict[AnomalyType, list[int]] = {}
        for e in self.entries:
            out.setdefault(e.type, []).append(e.case_id)
        return dict(sorted(out.items()))

    def merged(self, other: "GroundTruth") -> "GroundTruth":
        return GroundTruth(self.entries + other.entries, other.thresholds or self.thresholds)

    def detector_params(self) -> DetectorParams:
        return DetectorParams.from_dict(self.thresholds) if self.thresholds else DetectorParams()

    def check_against(self, dataset: Dataset) -> None:
        known = set(int(c) for c in dataset.case_ids)
        missing = [c for c in self.ids() if c not in known]
        if missing:
            raise ParameterError(f"ground-truth case ids not in dataset: {missing[:10]}")

    def to_json(self) -> dict:
        out = {"entries": [e.to_json() for e in self.entries]}
        if self.thresholds is not None:
            out["thresholds"] = self.thresholds
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "GroundTruth":
        try:
            entries = [
                TruthEntry(
                    int(e["case_id"]),
                    AnomalyType.parse(e["type"]),
                    tuple(e.get("attributes", ())),
                    e.get("order"),
                    e.get("params", {}),
                )
                for e in obj["entries"]
            ]
        except (KeyError, TypeError) as exc:
            raise ParameterError(f"invalid ground-truth document: {exc}") from exc
        return cls(entries, obj.get("thresholds"))

    def dump(self, fh: IO[str]) -> None:
        json.dump(self.to_json(), fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")

    @classmethod
    def load(cls, source: IO[str] | str) -> "GroundTruth":
        if isinstance(source, str):
            with open(source, encoding="utf-8") as fh:
                return cls.from_json(json.load(fh))
        return cls.from_json(json.load(source))


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, AnomalyType):
        return o.value
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


# ---------------------------------------------------------------------------
# reference geometry
# ---------------------------------------------------------------------------


class Reference:
    """Precomputed statistics of the dataset anomalies are measured against."""

    def __init__(self, dataset: Dataset, thr: DetectorParams):
        ds = dataset.sorted_by_id()
        self.ds, self.thr, self.n = ds, thr, len(ds)
        self.cont = ds.schema.continuous()
        self.subst = ds.schema.continuous(substantive=True)
        self.cats = ds.schema.categorical(substantive=True)
        self.stats = marginal_stats(ds)
        self.X = ds.matrix(self.cont)
        self.center, self.scale = robust_center_scale(self.X, thr.standardize)
        self.Xs = apply_scaling(self.X, self.center, self.scale)
        self.order = min(thr.combo_order, len(self.cats)) if self.cats else 0
        self.counts = {
            s: Counter(zip(*(ds[a] for a in s)))
            for size in range(1, max(self.order, 1) + 1)
            for s in combinations(self.cats, size)
        }
        self.scores = None
        if self.cont and self.n > thr.k_nn:
            self.scores = knn(self.Xs, thr.k_nn)[0].mean(axis=1)
            self.score_threshold = float(np.quantile(self.scores, 1 - thr.epsilon))
            self.dense = np.flatnonzero(self.scores <= np.median(self.scores))
        else:
            self.dense = np.arange(self.n)

    # -- continuous ------------------------------------------------------
    def deviation(self, name: str, value: float) -> float:
        c, s = self.stats.center(name, self.thr.method), self.stats.scale(name, self.thr.method)
        return float(deviation_scores(np.array([value]), c, s)[0])

    def univariate_extreme(self, values: dict) -> bool:
        return any(self.deviation(a, values[a]) > self.thr.k_extreme for a in self.subst)

    def standardize(self, points: np.ndarray) -> np.ndarray:
        return apply_scaling(np.atleast_2d(points), self.center, self.scale)

    def query(self, points: np.ndarray):
        """Distances/indices of the k nearest reference cases to raw ``points``."""
        return knn(self.Xs, self.thr.k_nn, queries=self.standardize(points))

    # -- categorical -----------------------------------------------------
    def count(self, attrs: tuple, values: tuple) -> int:
        if attrs not in self.counts:
            self.counts[attrs] = Counter(zip(*(self.ds[a] for a in attrs)))
        return self.counts[attrs].get(tuple(values), 0)

    def freq(self, attrs, values) -> float:
        return self.count(tuple(attrs), tuple(values)) / self.n if self.n else 0.0

    def common(self, attr: str, label: str) -> bool:
        c = self.count((attr,), (label,))
        return c > self.thr.c_rare and c / self.n > self.thr.tau_rare

    def labels(self, attr: str) -> list[str]:
        return sorted(self.stats.categorical[attr])

    def local_rare_subsets(self, values: dict, neighbours: np.ndarray, slack: int = 0) -> list[tuple]:
        """Subsets whose tuple is globally common but locally rare near ``neighbours``.

        ``slack`` extra matching neighbours are demanded on top of ``l_max``
        so later injections nearby cannot tip a case over the bound.
        """
        out = []
        for size in range(1, self.order + 1):
            for s in combinations(self.cats, size):
                vals = tuple(values[a] for a in s)
                if self.freq(s, vals) < self.thr.g_min:
                    continue
                local = np.mean([tuple(self.ds[a][j] for a in s) == vals for j in neighbours])
                if local <= self.thr.l_max + slack / len(neighbours):
                    out.append(s)
        return out

    def rare_combination(self, values: dict) -> bool:
        """Would this tuple (added once) trip the rare-combination rule?"""
        for size in range(2, self.order + 1):
            for s in combinations(self.cats, size):
                if all(self.common(a, values[a]) for a in s):
                    if self.count(s, tuple(values[a] for a in s)) + 1 <= self.thr.c_rare:
                        return True
        return False

    def row(self, pos: int) -> dict:
        return {nm: self.ds[nm][pos] for nm in self.ds.schema.names}


# ---------------------------------------------------------------------------
# constructions
# ---------------------------------------------------------------------------


def _budget_exceeded(t: AnomalyType, spec: InjectionSpec, failures: Counter) -> InjectionError:
    worst = ", ".join(f"{k} ({v}x)" for k, v in failures.most_common(3)) or "no candidates"
    return InjectionError(
        f"type {t.value}: retry budget {spec.retry_budget} exhausted; failing constraints: {worst}"
    )


def _require(ds: Dataset, t: AnomalyType, cont: bool, cat: bool, n_cat: int = 1) -> None:
    s = ds.schema
    if cont and not s.continuous(substantive=True):
        raise ParameterError(f"type {t.value} injection needs a continuous attribute")
    if cat and len(s.categorical(substantive=True)) < n_cat:
        raise ParameterError(f"type {t.value} injection needs {n_cat} categorical attribute(s)")


def _all_common(ref: Reference, values: dict) -> bool:
    return all(ref.common(a, values[a]) for a in ref.cats)


def _extreme_value(ref: Reference, spec: InjectionSpec, rng, name: str):
    c = ref.stats.center(name, ref.thr.method)
    s = ref.stats.scale(name, ref.thr.method)
    sign = 1.0 if rng.random() < 0.5 else -1.0
    u = rng.uniform(1.0, 1.5)
    step = s if s > 0 else abs(c) + 1.0
    return float(c + sign * spec.extremity * step * u)


def _mid_range_value(ref: Reference, spec: InjectionSpec, rng, name: str):
    x = ref.ds[name]
    bins = ref.thr.bins or 20
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        return None
    b = np.minimum(((x - lo) / (hi - lo) * bins).astype(np.int64), bins - 1)
    counts = np.bincount(b, minlength=bins)
    empty = [j for j in range(1, bins - 1) if counts[j] == 0]
    if not empty:
        return None
    j = empty[int(rng.integers(len(empty)))]
    return float(lo + (j + 0.5) * (hi - lo) / bins)


def _make_extreme(ref, spec, rng, values, failures, n_attrs):
    """Set ``n_attrs`` continuous attributes to extreme values in place."""
    names = [ref.subst[j] for j in rng.choice(len(ref.subst), size=min(n_attrs, len(ref.subst)), replace=False)]
    params = {"mode": spec.extreme_mode, "extremity": spec.extremity}
    for nm in names:
        if spec.extreme_mode == "extreme":
            v = _extreme_value(ref, spec, rng, nm)
            if ref.deviation(nm, v) <= ref.thr.k_extreme:
                failures["extremity does not exceed k_extreme"] += 1
                return None
        else:
            v = _mid_range_value(ref, spec, rng, nm)
            if v is None:
                failures[f"no empty interior bin on {nm}"] += 1
                return None
        values[nm] = v
        params[f"value:{nm}"] = v
    return names, params


def _fresh_label(current: Dataset, attr: str, taken: set) -> str:
    used = set(current[attr]) | taken
    j = 0
    while f"anom_{j}" in used:
        j += 1
    return f"anom_{j}"


def _make_rare(ref, spec, rng, current, values, failures, taken):
    attr = ref.cats[int(rng.integers(len(ref.cats)))]
    if spec.rarity_mode == "new":
        label = _fresh_label(current, attr, taken.setdefault(attr, set()))
    else:
        counts = Counter(current[attr]) + Counter(taken.get(attr, ()))
        options = sorted(lab for lab, c in counts.items() if c + 1 <= ref.thr.c_rare)
        if not options:
            failures[f"no reusable low-count label on {attr}"] += 1
            return None
        label = options[int(rng.integers(len(options)))]
    taken.setdefault(attr, set()).add(label)
    values[attr] = label
    return attr, {"mode": spec.rarity_mode, "label": label}


def _clone(ref: Reference, rng, failures, *, need_common=True) -> dict | None:
    if ref.n == 0:
        raise InjectionError("reference dataset is empty")
    pos = int(ref.dense[int(rng.integers(len(ref.dense)))])
    values = ref.row(pos)
    if ref.univariate_extreme(values):
        failures["clone has an extreme value"] += 1
        return None
    if need_common and not _all_common(ref, values):
        failures["clone has a rare class"] += 1
        return None
    values["_pos"] = pos
    return values


def _construct_univariate(t, ref, spec, rng, current, failures, taken):
    values = _clone(ref, rng, failures)
    if values is None:
        return None
    values.pop("_pos")
    attrs, params = [], {}
    if t in (T.EXTREME_VALUE, T.SIMPLE_MIXED):
        got = _make_extreme(ref, spec, rng, values, failures, spec.extreme_attributes if t is T.EXTREME_VALUE else 1)
        if got is None:
            return None
        attrs += got[0]
        params.update(got[1])
    if t in (T.RARE_CLASS, T.SIMPLE_MIXED):
        got = _make_rare(ref, spec, rng, current, values, failures, taken)
        if got is None:
            return None
        attrs.append(got[0])
        params.update(got[1])
    return values, tuple(attrs), None, params


def _construct_multidim_numerical(ref, spec, rng, failures, state):
    """Rejection-sample points inside the marginal band but jointly isolated."""
    if ref.scores is None:
        raise ParameterError("type IV injection needs more than k_nn reference cases")
    if "band" not in state:
        q_lo, q_hi = spec.band
        state["band"] = (np.quantile(ref.X, q_lo, axis=0), np.quantile(ref.X, q_hi, axis=0))
        state["queue"] = []
    lo, hi = state["band"]
    floor = spec.isolation * ref.score_threshold
    if not state["queue"]:
        batch = lo + rng.random((256, lo.size)) * (hi - lo)
        dist, idx = ref.query(batch)
        state["queue"] = list(zip(batch, dist.mean(axis=1), idx))[::-1]
    point, score, neigh = state["queue"].pop()
    values = {nm: float(v) for nm, v in zip(ref.cont, point)}
    if ref.univariate_extreme(values):
        failures["coordinate exceeds a univariate threshold"] += 1
        return None
    if ref.thr.bins and any(
        _bin_share(ref.ds[a], values[a], ref.thr.bins) <= _share_for_k(ref.thr.k_extreme) for a in ref.subst
    ):
        failures["coordinate in a rare marginal bin"] += 1
        return None
    if not score > max(floor, ref.score_threshold):
        failures["joint score below isolation threshold"] += 1
        return None
    if ref.cats:
        tuples = Counter(tuple(ref.ds[a][j] for a in ref.cats) for j in neigh)
        best = max(tuples.values())
        label = next(tup for tup in (tuple(ref.ds[a][j] for a in ref.cats) for j in neigh) if tuples[tup] == best)
        values.update(zip(ref.cats, label))
        if not _all_common(ref, values):
            failures["neighbour classes are rare"] += 1
            return None
        if ref.local_rare_subsets(values, neigh, slack=1):
            failures["neighbour classes locally rare"] += 1
            return None
        if ref.rare_combination(values):
            failures["neighbour class combination is rare"] += 1
            return None
    params = {"band": list(spec.band), "score": float(score), "threshold": float(ref.score_threshold)}
    return values, tuple(ref.cont), None, params


def _bin_share(x: np.ndarray, value: float, bins: int) -> float:
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        return 1.0
    b = np.minimum(((x - lo) / (hi - lo) * bins).astype(np.int64), bins - 1)
    j = min(int((value - lo) / (hi - lo) * bins), bins - 1)
    return float(np.mean(b == j)) + 1.0 / (x.size + 1)


def _share_for_k(k: float) -> float:
    from statistics import NormalDist

    return 2 * (1 - NormalDist().cdf(k))


def _zero_count_tuples(ref: Reference, current: Dataset, spec: InjectionSpec) -> list[tuple]:
    out = []
    for size in range(2, ref.order + 1):
        for s in combinations(ref.cats, size):
            present = set(zip(*(current[a] for a in s)))
            pools = [[lab for lab in ref.labels(a) if ref.common(a, lab)] for a in s]
            for vals in product(*pools):
                if ref.count(s, vals) == 0 and vals not in present:
                    out.append((s, vals))
    return out


def _construct_multidim_rare_class(ref, spec, rng, current, failures, state):
    if "candidates" not in state:
        cands = _zero_count_tuples(ref, current, spec)
        if spec.tuple_rule == "random":
            cands = [cands[i] for i in rng.permutation(len(cands))]
        state["candidates"] = cands
        state["tries"] = 0
    if not state["candidates"]:
        raise InjectionError(
            "type V: no zero-count class combination with common marginals remains "
            f"(combo_order={ref.thr.combo_order})"
        )
    attrs, vals = state["candidates"][0]
    values = _clone(ref, rng, failures)
    if values is None:
        return None
    pos = values.pop("_pos")
    values.update(zip(attrs, vals))
    neigh = ref.query(ref.X[pos])[1][0]
    if ref.local_rare_subsets(values, neigh, slack=1):
        failures["class locally rare at placement"] += 1
        state["tries"] += 1
        if state["tries"] >= 200:  # this tuple fits nowhere; move on
            state["candidates"].pop(0)
            state["tries"] = 0
        return None
    state["candidates"].pop(0)
    state["tries"] = 0
    params = {"values": list(vals), "base_count": 0}
    return values, tuple(attrs), None, params


def _construct_multidim_mixed(ref, spec, rng, failures):
    if ref.scores is None:
        raise ParameterError("type VI injection needs more than k_nn reference cases")
    order = spec.order
    if order > len(ref.cats):
        raise ParameterError(f"type VI order {order} exceeds the number of categorical attributes")
    values = _clone(ref, rng, failures)
    if values is None:
        return None
    pos = values.pop("_pos")
    neigh = ref.query(ref.X[pos])[1][0]
    options = []
    for s in combinations(ref.cats, order):
        pools = [[lab for lab in ref.labels(a) if ref.common(a, lab)] for a in s]
        local_tuples = {tuple(ref.ds[a][j] for a in s) for j in neigh}
        for vals in product(*pools):
            if vals in local_tuples or ref.freq(s, vals) < ref.thr.g_min:
                continue
            trial = dict(values, **dict(zip(s, vals)))
            # every lower-order part must stay locally common, so the order is exact
            lower = [r for r in ref.local_rare_subsets(trial, neigh) if len(r) < order]
            if lower:
                continue
            options.append((ref.freq(s, vals), s, vals))
    if not options:
        failures["no globally common class absent from the neighbourhood"] += 1
        return None
    top = max(o[0] for o in options)
    best = [o for o in options if o[0] == top]
    _, attrs, vals = best[int(rng.integers(len(best)))]
    values.update(zip(attrs, vals))
    params = {"values": list(vals), "global_freq": float(top), "source_case": int(ref.ds.case_ids[pos])}
    return values, tuple(attrs) + tuple(ref.cont), order, params


def inject(
    dataset: Dataset,
    atype: AnomalyType,
    spec: InjectionSpec,
    seed: int | None = None,
    *,
    reference: Dataset | None = None,
) -> tuple[Dataset, GroundTruth]:
    """Append ``spec.count(atype)`` cases of one anomaly type.

    Returns the extended dataset and the ground truth for the new cases.
    """
    atype = AnomalyType.parse(atype) if not isinstance(atype, AnomalyType) else atype
    count = spec.count(atype)
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    truth = GroundTruth([], spec.thresholds.to_dict())
    if count == 0:
        return dataset, truth
    needs = {
        T.EXTREME_VALUE: (True, False, 1),
        T.RARE_CLASS: (False, True, 1),
        T.SIMPLE_MIXED: (True, True, 1),
        T.MULTIDIM_NUMERICAL: (True, False, 0),
        T.MULTIDIM_RARE_CLASS: (False, True, 2),
        T.MULTIDIM_MIXED: (True, True, 1),
    }[atype]
    _require(dataset, atype, *needs)
    if atype is T.MULTIDIM_NUMERICAL and len(dataset.schema.continuous()) < 2:
        raise ParameterError("type IV injection needs two continuous attributes")
    ref = Reference(reference if reference is not None else dataset, spec.thresholds)

    made: list[tuple] = []
    failures: Counter = Counter()
    taken: dict = {}
    state: dict = {}
    attempts = 0
    while len(made) < count:
        if attempts >= spec.retry_budget:
            raise _budget_exceeded(atype, spec, failures)
        attempts += 1
        if atype in (T.EXTREME_VALUE, T.RARE_CLASS, T.SIMPLE_MIXED):
            got = _construct_univariate(atype, ref, spec, rng, dataset, failures, taken)
        elif atype is T.MULTIDIM_NUMERICAL:
            got = _construct_multidim_numerical(ref, spec, rng, failures, state)
        elif atype is T.MULTIDIM_RARE_CLASS:
            got = _construct_multidim_rare_class(ref, spec, rng, dataset, failures, state)
        else:
            got = _construct_multidim_mixed(ref, spec, rng, failures)
        if got is not None:
            made.append(got)
    if failures:
        log.debug("type %s: %d rejected candidates %s", atype.value, sum(failures.values()), dict(failures))

    start = dataset.next_case_id()
    ids = list(range(start, start + count))
    names = dataset.schema.names
    rows = [[vals[nm] for nm in names] for vals, *_ in made]
    extended = dataset.append(Dataset.from_rows(dataset.schema, rows, ids))
    truth.entries.extend(
        TruthEntry(cid, atype, attrs, order, params)
        for cid, (_, attrs, order, params) in zip(ids, made)
    )
    return extended, truth


def injection_seeds(seed: int) -> dict[AnomalyType, int]:
    """One independent seed per anomaly type, derived from a master seed."""
    state = np.random.SeedSequence(seed).generate_state(len(AnomalyType))
    return {t: int(s) for t, s in zip(AnomalyType, state)}


def inject_all(
    dataset: Dataset, spec: InjectionSpec, *, reference: Dataset | None = None
) -> tuple[Dataset, GroundTruth]:
    """Inject every type with a non-zero count, in order I..VI."""
    reference = dataset if reference is None else reference
    seeds = injection_seeds(spec.seed)
    truth = GroundTruth([], spec.thresholds.to_dict())
    for t in AnomalyType:
        dataset, part = inject(dataset, t, spec, seeds[t], reference=reference)
        truth = truth.merged(part)
    return dataset, truth


def build_benchmark(base: BaseSpec, inj: InjectionSpec) -> tuple[Dataset, GroundTruth]:
    return inject_all(generate_base(base), inj)


# ---------------------------------------------------------------------------
# construction checks
# ---------------------------------------------------------------------------


def check_construction(
    dataset: Dataset, truth: GroundTruth, reference: Dataset, thresholds: DetectorParams | None = None
) -> list[str]:
    """Re-verify each injected case against its type's construction invariant.

    Returns human-readable failures; an empty list means every case holds.
    """
    thr = thresholds or truth.detector_params()
    ref = Reference(reference, thr)
    ds = dataset.sorted_by_id()
    problems = []
    for e in truth.entries:
        values = {nm: ds[nm][ds.position(e.case_id)] for nm in ds.schema.names}
        where = f"case {e.case_id} (type {e.type.value})"
        if e.type in (T.EXTREME_VALUE, T.SIMPLE_MIXED) and e.params.get("mode", "extreme") == "extreme":
            for a in e.attributes:
                if a in ref.subst and not ref.deviation(a, values[a]) > thr.k_extreme:
                    problems.append(f"{where}: {a} not beyond the univariate threshold")
        if e.type is T.EXTREME_VALUE and not _all_common(ref, values):
            problems.append(f"{where}: carries a rare class")
        if e.type in (T.RARE_CLASS, T.SIMPLE_MIXED):
            cat = [a for a in e.attributes if a in ref.cats]
            if not cat or ref.common(cat[0], values[cat[0]]):
                problems.append(f"{where}: class is not rare")
        if e.type is T.RARE_CLASS and ref.univariate_extreme(values):
            problems.append(f"{where}: has an extreme continuous value")
        if e.type is T.MULTIDIM_NUMERICAL:
            for a in ref.cont:
                s = ref.stats.continuous[a]
                if not s.min <= values[a] <= s.max:
                    problems.append(f"{where}: {a} outside the base range")
            if ref.univariate_extreme(values):
                problems.append(f"{where}: exceeds a univariate threshold")
            point = np.array([[values[a] for a in ref.cont]])
            score = float(ref.query(point)[0].mean())
            if not score > ref.score_threshold:
                problems.append(f"{where}: joint score {score:.4g} not in the top epsilon")
        if e.type is T.MULTIDIM_RARE_CLASS:
            attrs = tuple(e.attributes)
            vals = tuple(values[a] for a in attrs)
            if ref.count(attrs, vals) != 0:
                problems.append(f"{where}: combination present in the base")
            if not all(ref.common(a, values[a]) for a in attrs):
                problems.append(f"{where}: a marginal is not common")
        if e.type is T.MULTIDIM_MIXED:
            cats = tuple(a for a in e.attributes if a in ref.cats)
            vals = tuple(values[a] for a in cats)
            point = np.array([[values[a] for a in ref.cont]])
            neigh = ref.query(point)[1][0]
            if ref.freq(cats, vals) < thr.g_min:
                problems.append(f"{where}: class not globally common")
            if any(tuple(ref.ds[a][j] for a in cats) == vals for j in neigh):
                problems.append(f"{where}: class present among its base neighbours")
    return problems


# ---------------------------------------------------------------------------
# default geometry
# ---------------------------------------------------------------------------


def two_cluster_base(n_cases: int = 2000, seed: int = 20240601) -> BaseSpec:
    """Two Gaussian clouds with a cluster-bound colour and a sparse dept/role pairing.

    ``color`` is fully determined by the cluster (type VI material);
    ``role`` depends on ``dept`` so that many dept/role pairs never occur
    although every dept and every role is common (type V material).
    """
    depts = [f"d{i}" for i in range(1, 6)]
    roles = [f"r{i}" for i in range(1, 6)]
    conditional = {
        d: {roles[i]: 0.5, roles[(i + 1) % 5]: 0.5} for i, d in enumerate(depts)
    }
    return BaseSpec(
        n_cases=n_cases,
        continuous=["x", "y"],
        clusters=[
            ClusterSpec(mean=[0.0, 0.0], scale=[1.0, 1.0], weight=0.5),
            ClusterSpec(mean=[6.0, 6.0], scale=[1.0, 1.0], weight=0.5),
        ],
        categorical=[
            CategoricalSpec("color", by_cluster=[{"blue": 1.0}, {"pink": 1.0}]),
            CategoricalSpec("dept", probs={d: 0.2 for d in depts}),
            CategoricalSpec("role", given="dept", conditional=conditional),
        ],
        seed=seed,
    )


def default_injection(count: int = 10, seed: int = 20240602, **overrides) -> InjectionSpec:
    return InjectionSpec(counts={t: count for t in AnomalyType}, seed=seed, **overrides)
