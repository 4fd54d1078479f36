"""
Reference detectors, one per anomaly type.

Every detector returns a :class:`ScoreVector` whose scores and flags are
keyed by ``case_id`` (arrays are in ascending case_id order). Higher scores
mean more anomalous. Univariate detectors (types I-III) ignore the
dependency attribute; the multivariate ones (IV, VI) include it as a
coordinate, which is how dependent-data variants are analysed.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from itertools import combinations
from statistics import NormalDist
from typing import IO, Callable

import numpy as np

from .data import MAD_SCALE, Dataset, column_stats
from .errors import ParameterError

# Score assigned to any value that differs from the center of a zero-scale column.
ZERO_SCALE_SCORE = 1e6


@dataclass(frozen=True)
class DetectorParams:
    """Thresholds shared by the detectors and the type classifier.

    Defaults are conventions: ``k_extreme=3`` follows the usual 3-sigma / 3-MAD
    rule, the remaining values are tuned for desk-scale benchmarks.
    """

    k_extreme: float = 3.0
    method: str = "mad"  # "sd" or "mad"
    leave_one_out: bool = False
    bins: int = 0  # equal-width bins for the 1-D density signal; 0 disables it
    tau_rare: float = 0.01
    c_rare: int = 1
    k_nn: int = 10
    distance: str = "euclidean"
    standardize: str = "robust"  # "robust", "zscore" or "none"
    epsilon: float = 0.02
    combo_order: int = 2
    g_min: float = 0.05
    l_max: float = 0.1

    def __post_init__(self):
        if not self.k_extreme > 0:
            raise ParameterError("k_extreme must be > 0")
        if self.method not in ("sd", "mad"):
            raise ParameterError(f"method must be 'sd' or 'mad', got {self.method!r}")
        if not 0 < self.tau_rare < 1:
            raise ParameterError("tau_rare must lie in (0, 1)")
        if self.c_rare < 0:
            raise ParameterError("c_rare must be >= 0")
        if self.k_nn < 1:
            raise ParameterError("k_nn must be >= 1")
        if self.distance != "euclidean":
            raise ParameterError("only euclidean distance is supported")
        if self.standardize not in ("robust", "zscore", "none"):
            raise ParameterError(f"unknown standardization {self.standardize!r}")
        if not 0 < self.epsilon < 1:
            raise ParameterError("epsilon must lie in (0, 1)")
        if self.combo_order < 2:
            raise ParameterError("combo_order must be >= 2")
        if not 0 <= self.g_min <= 1 or not 0 <= self.l_max <= 1:
            raise ParameterError("g_min and l_max must lie in [0, 1]")
        if self.bins < 0:
            raise ParameterError("bins must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "DetectorParams":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ParameterError(f"unknown detector parameters: {sorted(unknown)}")
        return cls(**obj)

    def replace(self, **changes) -> "DetectorParams":
        return DetectorParams(**{**self.to_dict(), **changes})


@dataclass(frozen=True)
class Evidence:
    attributes: tuple[str, ...]
    check: str
    score: float
    threshold: float
    order: int | None = None

    def to_json(self) -> dict:
        out = {
            "attributes": list(self.attributes),
            "check": self.check,
            "score": float(self.score),
            "threshold": float(self.threshold),
        }
        if self.order is not None:
            out["order"] = self.order
        return out


@dataclass
class ScoreVector:
    detector_id: str
    case_ids: np.ndarray
    scores: np.ndarray
    flags: np.ndarray | None = None
    params: dict = field(default_factory=dict)
    evidence: dict[int, list[Evidence]] = field(default_factory=dict)

    def __post_init__(self):
        self.case_ids = np.asarray(self.case_ids, dtype=np.int64)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.flags is not None:
            self.flags = np.asarray(self.flags, dtype=bool)
        self._pos = {int(c): i for i, c in enumerate(self.case_ids)}

    def __len__(self):
        return int(self.case_ids.size)

    def score_of(self, case_id: int) -> float:
        return float(self.scores[self._pos[int(case_id)]])

    def flag_of(self, case_id: int) -> bool:
        if self.flags is None:
            raise ValueError(f"{self.detector_id} has no flags")
        return bool(self.flags[self._pos[int(case_id)]])

    def as_mapping(self) -> dict[int, float]:
        return {int(c): float(s) for c, s in zip(self.case_ids, self.scores)}

    def flagged_ids(self) -> list[int]:
        if self.flags is None:
            return []
        return [int(c) for c in self.case_ids[self.flags]]

    def aligned(self, case_ids) -> np.ndarray:
        """Scores reordered to match ``case_ids``; KeyError on a missing id."""
        return np.array([self.scores[self._pos[int(c)]] for c in case_ids], dtype=np.float64)

    def write_csv(self, fh: IO[str]) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["case_id", "score", "flag"])
        order = np.argsort(self.case_ids, kind="stable")
        for i in order:
            flag = "" if self.flags is None else int(self.flags[i])
            writer.writerow([int(self.case_ids[i]), f"{self.scores[i]:.12g}", flag])

    def sidecar(self) -> dict:
        return {"detector_id": self.detector_id, "params": self.params}

    def write_sidecar(self, fh: IO[str]) -> None:
        json.dump(self.sidecar(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# shared machinery
# ---------------------------------------------------------------------------


def knn(points: np.ndarray, k: int, queries: np.ndarray | None = None):
    """Exact brute-force k nearest neighbours under Euclidean distance.

    Without ``queries`` each point is matched against all *other* points.
    Equal distances are resolved by ascending row index, so callers that keep
    rows in case_id order get case_id tie-breaking.

    Returns ``(distances, indices)``, both of shape ``(m, k)``.
    """
    X = np.asarray(points, dtype=np.float64)
    self_query = queries is None
    Q = X if self_query else np.asarray(queries, dtype=np.float64)
    n, m = X.shape[0], Q.shape[0]
    limit = n - 1 if self_query else n
    if k > limit:
        raise ParameterError(f"k_nn={k} requires more than {k} reference cases, have {limit}")
    dist = np.empty((m, k))
    idx = np.empty((m, k), dtype=np.int64)
    chunk = max(1, int(2_000_000 // max(1, n * max(1, X.shape[1]))))
    for start in range(0, m, chunk):
        stop = min(m, start + chunk)
        diff = Q[start:stop, None, :] - X[None, :, :]
        D = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        if self_query:
            D[np.arange(stop - start), np.arange(start, stop)] = np.inf
        order = np.argsort(D, axis=1, kind="stable")[:, :k]
        idx[start:stop] = order
        dist[start:stop] = np.take_along_axis(D, order, axis=1)
    return dist, idx


def robust_center_scale(X: np.ndarray, how: str):
    """Per-column center and scale for ``how`` in {robust, zscore, none}."""
    d = X.shape[1]
    if how == "none" or X.shape[0] == 0:
        return np.zeros(d), np.ones(d)
    stats = [column_stats(X[:, j]) for j in range(d)]
    if how == "robust":
        return np.array([s.median for s in stats]), np.array([s.mad for s in stats])
    return np.array([s.mean for s in stats]), np.array([s.sd for s in stats])


def apply_scaling(X: np.ndarray, center: np.ndarray, scale: np.ndarray) -> np.ndarray:
    out = np.zeros_like(X, dtype=np.float64)
    ok = scale > 0
    out[:, ok] = (X[:, ok] - center[ok]) / scale[ok]
    return out


def neighbour_space(ds: Dataset, params: DetectorParams) -> tuple[list[str], np.ndarray]:
    names = ds.schema.continuous()
    X = ds.matrix(names)
    center, scale = robust_center_scale(X, params.standardize)
    return names, apply_scaling(X, center, scale)


def tuple_codes(ds: Dataset, names) -> np.ndarray:
    """Integer code per row identifying the row's value tuple over ``names``."""
    if len(ds) == 0:
        return np.zeros(0, dtype=np.int64)
    cols = [np.unique(ds[nm].astype(str), return_inverse=True)[1] for nm in names]
    if len(cols) == 1:
        return cols[0].astype(np.int64)
    _, inv = np.unique(np.column_stack(cols), axis=0, return_inverse=True)
    return inv.reshape(-1).astype(np.int64)


def _prepare(dataset: Dataset) -> Dataset:
    return dataset.sorted_by_id()


def _result(detector_id, ds, scores, flags, params, evidence) -> ScoreVector:
    return ScoreVector(detector_id, ds.case_ids.copy(), scores, flags, params.to_dict(), evidence)


def _add(evidence: dict, case_id, ev: Evidence) -> None:
    evidence.setdefault(int(case_id), []).append(ev)


# ---------------------------------------------------------------------------
# Type I
# ---------------------------------------------------------------------------


def _center_scale(x: np.ndarray, method: str) -> tuple[float, float]:
    s = column_stats(x)
    return (s.median, s.mad) if method == "mad" else (s.mean, s.sd)


def _loo_center_scale(x: np.ndarray, method: str) -> tuple[np.ndarray, np.ndarray]:
    n = x.size
    if method == "sd":
        mean = x.mean()
        d = x - mean
        q = np.dot(d, d)
        centers = mean - d / (n - 1)
        var = (q - d * d) / (n - 1) - (d / (n - 1)) ** 2
        # the closed form cancels badly when the rest is (nearly) constant;
        # recompute those cases directly
        noisy = var <= 64 * np.finfo(float).eps * max(q, 1.0) / (n - 1)
        for i in np.flatnonzero(noisy):
            var[i] = np.var(np.delete(x, i))
        return centers, np.sqrt(np.clip(var, 0.0, None))
    centers = np.empty(n)
    scales = np.empty(n)
    for i in range(n):
        rest = np.delete(x, i)
        med = np.median(rest)
        centers[i] = med
        scales[i] = np.median(np.abs(rest - med)) * MAD_SCALE
    return centers, scales


def deviation_scores(x: np.ndarray, center, scale) -> np.ndarray:
    """``|x - center| / scale`` with the zero-scale rule."""
    x = np.asarray(x, dtype=np.float64)
    center = np.broadcast_to(np.asarray(center, dtype=np.float64), x.shape)
    scale = np.broadcast_to(np.asarray(scale, dtype=np.float64), x.shape)
    out = np.zeros_like(x)
    pos = scale > 0
    out[pos] = np.abs(x[pos] - center[pos]) / scale[pos]
    out[~pos & (x != center)] = ZERO_SCALE_SCORE
    return out


def density_scores(x: np.ndarray, bins: int) -> np.ndarray:
    """Rarity of each value's equal-width bin, as a two-sided normal-tail z.

    A bin holding a fraction ``p`` of the cases scores ``z`` with
    ``P(|Z| > z) = p``, so it is comparable to the deviation score.
    """
    n = x.size
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        return np.zeros(n)
    b = np.minimum(((x - lo) / (hi - lo) * bins).astype(np.int64), bins - 1)
    p = np.bincount(b, minlength=bins)[b] / n
    nd = NormalDist()
    return np.array([nd.inv_cdf(1 - q / 2) if q < 1 else 0.0 for q in p])


def extreme_value_matrix(ds: Dataset, params: DetectorParams):
    """Per-attribute deviation (and optional density) scores, shape ``(n, a)``."""
    names = ds.schema.continuous(substantive=True)
    if not names:
        raise ParameterError("extreme-value detection needs a continuous attribute")
    if len(ds) < 2:
        raise ParameterError("extreme-value detection needs at least 2 cases")
    dev = np.zeros((len(ds), len(names)))
    dens = np.zeros_like(dev)
    for j, nm in enumerate(names):
        x = ds[nm]
        if params.leave_one_out:
            c, s = _loo_center_scale(x, params.method)
        else:
            c, s = _center_scale(x, params.method)
        dev[:, j] = deviation_scores(x, c, s)
        if params.bins:
            dens[:, j] = density_scores(x, params.bins)
    return names, dev, dens


def detect_extreme_value(dataset: Dataset, params: DetectorParams | None = None) -> ScoreVector:
    params = params or DetectorParams()
    ds = _prepare(dataset)
    names, dev, dens = extreme_value_matrix(ds, params)
    per_attr = np.maximum(dev, dens)
    scores = per_attr.max(axis=1)
    flags = scores > params.k_extreme
    evidence: dict = {}
    for i in np.flatnonzero(flags):
        for j, nm in enumerate(names):
            if dev[i, j] > params.k_extreme:
                _add(evidence, ds.case_ids[i], Evidence((nm,), "extreme_value", dev[i, j], params.k_extreme))
            elif dens[i, j] > params.k_extreme:
                _add(evidence, ds.case_ids[i], Evidence((nm,), "rare_value_density", dens[i, j], params.k_extreme))
    return _result("type1", ds, scores, flags, params, evidence)


# ---------------------------------------------------------------------------
# Type II
# ---------------------------------------------------------------------------


def class_frequencies(ds: Dataset, names) -> tuple[np.ndarray, np.ndarray]:
    """Per-case count and relative frequency of its own value, shape ``(n, a)``."""
    n = len(ds)
    counts = np.zeros((n, len(names)), dtype=np.int64)
    for j, nm in enumerate(names):
        inv = tuple_codes(ds, [nm])
        counts[:, j] = np.bincount(inv)[inv] if n else 0
    return counts, counts / max(n, 1)


def detect_rare_class(dataset: Dataset, params: DetectorParams | None = None) -> ScoreVector:
    params = params or DetectorParams()
    ds = _prepare(dataset)
    names = ds.schema.categorical(substantive=True)
    if not names:
        raise ParameterError("rare-class detection needs a categorical attribute")
    counts, freqs = class_frequencies(ds, names)
    # log(1) is exactly 0, so a single-label column contributes nothing.
    scores = -np.log(freqs).sum(axis=1) if len(ds) else np.zeros(0)
    by_count = counts <= params.c_rare
    by_freq = freqs <= params.tau_rare
    rare = by_count | by_freq
    flags = rare.any(axis=1)
    evidence: dict = {}
    for i, j in zip(*np.nonzero(rare)):
        cid = ds.case_ids[i]
        if by_count[i, j]:
            _add(evidence, cid, Evidence((names[j],), "rare_count", counts[i, j], params.c_rare))
        else:
            _add(evidence, cid, Evidence((names[j],), "rare_frequency", freqs[i, j], params.tau_rare))
    return _result("type2", ds, scores, flags, params, evidence)


# ---------------------------------------------------------------------------
# Type III
# ---------------------------------------------------------------------------


def detect_simple_mixed(dataset: Dataset, params: DetectorParams | None = None) -> ScoreVector:
    """Conjunction of the type I and type II rules.

    The score adds both scores after dividing each by its own flag scale
    (``k_extreme`` and ``-log(tau_rare)``).
    """
    params = params or DetectorParams()
    ds = _prepare(dataset)
    if not ds.schema.continuous(substantive=True) or not ds.schema.categorical(substantive=True):
        raise ParameterError("simple-mixed detection needs continuous and categorical attributes")
    ext = detect_extreme_value(ds, params)
    rare = detect_rare_class(ds, params)
    scores = ext.scores / params.k_extreme + rare.scores / -math.log(params.tau_rare)
    flags = ext.flags & rare.flags
    evidence = {
        cid: ext.evidence[cid] + rare.evidence[cid]
        for cid in (int(c) for c in ds.case_ids[flags])
    }
    return _result("type3", ds, scores, flags, params, evidence)


# ---------------------------------------------------------------------------
# Type IV
# ---------------------------------------------------------------------------


def knn_scores(X: np.ndarray, k: int) -> np.ndarray:
    return knn(X, k)[0].mean(axis=1)


def detect_multidim_numerical(dataset: Dataset, params: DetectorParams | None = None) -> ScoreVector:
    params = params or DetectorParams()
    ds = _prepare(dataset)
    names, X = neighbour_space(ds, params)
    if len(names) < 2:
        raise ParameterError(
            "joint-density detection needs two continuous attributes "
            "(a dependency attribute counts as one)"
        )
    if len(ds) <= params.k_nn:
        raise ParameterError(f"k_nn={params.k_nn} requires more than {params.k_nn} cases, have {len(ds)}")
    scores = knn_scores(X, params.k_nn)
    threshold = float(np.quantile(scores, 1 - params.epsilon))
    flags = scores > threshold
    evidence: dict = {}
    for i in np.flatnonzero(flags):
        _add(evidence, ds.case_ids[i], Evidence(tuple(names), "joint_density", scores[i], threshold))
    return _result("type4", ds, scores, flags, params, evidence)


# ---------------------------------------------------------------------------
# Type V
# ---------------------------------------------------------------------------


def detect_multidim_rare_class(dataset: Dataset, params: DetectorParams | None = None) -> ScoreVector:
    """Rare value combinations whose individual values are all common.

    A marginal counts as common when it would not trip the type II rule
    (frequency above ``tau_rare`` and count above ``c_rare``).
    """
    params = params or DetectorParams()
    ds = _prepare(dataset)
    names = ds.schema.categorical(substantive=True)
    if len(names) < 2:
        raise ParameterError("rare-combination detection needs two categorical attributes")
    n = len(ds)
    counts, freqs = class_frequencies(ds, names)
    common = (counts > params.c_rare) & (freqs > params.tau_rare)
    order = min(params.combo_order, len(names))
    scores = np.zeros(n)
    flags = np.zeros(n, dtype=bool)
    evidence: dict = {}
    for size in range(2, order + 1):
        for subset in combinations(range(len(names)), size):
            attrs = tuple(names[j] for j in subset)
            inv = tuple_codes(ds, attrs)
            cnt = np.bincount(inv)[inv] if n else np.zeros(0, dtype=np.int64)
            scores = np.maximum(scores, -np.log(cnt / n)) if n else scores
            hit = (cnt <= params.c_rare) & common[:, list(subset)].all(axis=1)
            flags |= hit
            for i in np.flatnonzero(hit):
                _add(evidence, ds.case_ids[i], Evidence(attrs, "rare_combination", cnt[i], params.c_rare))
    return _result("type5", ds, scores, flags, params, evidence)


# ---------------------------------------------------------------------------
# Type VI
# ---------------------------------------------------------------------------


def local_rarity(ds: Dataset, params: DetectorParams, neighbours: np.ndarray | None = None):
    """Global-vs-local frequency of every case's class tuples.

    Yields ``(attrs, global_freq, local_freq)`` per categorical subset of size
    ``1..combo_order`` (clamped to the number of categorical attributes).
    """
    names = ds.schema.categorical(substantive=True)
    if neighbours is None:
        _, X = neighbour_space(ds, params)
        neighbours = knn(X, params.k_nn)[1]
    n = len(ds)
    order = min(params.combo_order, len(names))
    for size in range(1, order + 1):
        for subset in combinations(names, size):
            inv = tuple_codes(ds, subset)
            g = np.bincount(inv)[inv] / n
            local = (inv[neighbours] == inv[:, None]).mean(axis=1)
            yield subset, g, local


def detect_multidim_mixed(dataset: Dataset, params: DetectorParams | None = None) -> ScoreVector:
    params = params or DetectorParams()
    ds = _prepare(dataset)
    conts = ds.schema.continuous()
    if not conts or not ds.schema.categorical(substantive=True):
        raise ParameterError("local class rarity needs continuous and categorical attributes")
    if len(ds) <= params.k_nn:
        raise ParameterError(f"k_nn={params.k_nn} requires more than {params.k_nn} cases, have {len(ds)}")
    n = len(ds)
    scores = np.zeros(n)
    flags = np.zeros(n, dtype=bool)
    evidence: dict = {}
    for subset, g, local in local_rarity(ds, params):
        scores = np.maximum(scores, np.clip(g - local, 0.0, None))
        hit = (g >= params.g_min) & (local <= params.l_max)
        # only the lowest order at which a case is locally rare is reported
        new = hit & ~flags
        for i in np.flatnonzero(new):
            _add(
                evidence,
                ds.case_ids[i],
                Evidence(tuple(subset) + tuple(conts), "local_class_rarity", local[i], params.l_max, len(subset)),
            )
        flags |= hit
    return _result("type6", ds, scores, flags, params, evidence)


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

DETECTORS: dict[str, Callable[[Dataset, DetectorParams], ScoreVector]] = {
    "type1": detect_extreme_value,
    "type2": detect_rare_class,
    "type3": detect_simple_mixed,
    "type4": detect_multidim_numerical,
    "type5": detect_multidim_rare_class,
    "type6": detect_multidim_mixed,
}


def run_detector(detector_id: str, dataset: Dataset, params: DetectorParams | None = None) -> ScoreVector:
    try:
        fn = DETECTORS[detector_id]
    except KeyError:
        raise ParameterError(
            f"unknown detector {detector_id!r}; registered: {', '.join(DETECTORS)}"
        ) from None
    return fn(dataset, params or DetectorParams())
