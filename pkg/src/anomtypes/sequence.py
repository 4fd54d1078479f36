"""
Dependent data: seasonal series, within-series anomaly injection, symbol
sequences, and transforms that change the level at which cases are defined
(differencing, cycle segmentation, sliding windows, group aggregation).

A series is an ordinary :class:`~anomtypes.data.Dataset` with a ``time``
dependency attribute and one continuous ``value`` attribute; its case ids
equal its time indices.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from .data import Attribute, AttributeKind, Dataset, Schema, column_stats
from .detectors import deviation_scores
from .errors import DataError, ParameterError
from .injector import GroundTruth, TruthEntry
from .taxonomy import AnomalyType, ExternalTypeLabel, map_external

TIME, VALUE = "time", "value"
SERIES_SCHEMA = Schema.of((TIME, "continuous"), (VALUE, "continuous"), dependency=TIME)

VARIANTS = ("additive", "transitory_change", "level_shift", "innovational", "deviant_cycle")


# ---------------------------------------------------------------------------
# series
# ---------------------------------------------------------------------------


def series_from_values(values: Sequence[float], start: int = 0) -> Dataset:
    values = np.asarray(values, dtype=np.float64)
    t = np.arange(start, start + values.size)
    return Dataset(SERIES_SCHEMA, {TIME: t.astype(np.float64), VALUE: values}, case_ids=t)


def check_series(series: Dataset) -> None:
    """Raise DataError unless ``series`` has the series schema and unit time steps."""
    if series.schema != SERIES_SCHEMA:
        raise DataError(f"a series needs schema ({TIME}, {VALUE}) with {TIME} as dependency")
    t = series.sorted_by_id()[TIME]
    if t.size and (np.any(np.diff(t) != 1) or np.any(t != np.round(t))):
        raise DataError("series time must be integer, strictly increasing and gap-free")


def series_values(series: Dataset) -> np.ndarray:
    return series.sorted_by_id()[VALUE]


def generate_series(
    n: int,
    slope: float = 0.0,
    amplitude: float = 1.0,
    period: int = 20,
    noise: float = 0.0,
    seed: int = 0,
) -> Dataset:
    """Trend plus sine plus Gaussian noise on time points ``0..n-1``."""
    if period < 2:
        raise ParameterError("period must be >= 2")
    if n < 2 * period:
        raise ParameterError(f"n={n} must cover at least two periods (2 x {period})")
    if noise < 0:
        raise ParameterError("noise must be >= 0")
    rng = np.random.default_rng(seed)
    t = np.arange(n, dtype=np.float64)
    values = slope * t + amplitude * np.sin(2 * np.pi * t / period)
    if noise > 0:
        values = values + noise * rng.standard_normal(n)
    return series_from_values(values)


@dataclass(frozen=True)
class SeriesAnomaly:
    """One within-series anomaly.

    ``magnitude`` is the offset (additive, transitory, level shift);
    ``decay`` the per-step factor of a transitory change; ``slope_delta``
    and ``amp_delta`` the trend/seasonal change of an innovational anomaly;
    ``cycle`` the index of the cycle a deviant cycle replaces. ``period`` is
    needed by the innovational and deviant-cycle variants.
    """

    variant: str
    t0: int = 0
    magnitude: float = 0.0
    decay: float = 0.7
    slope_delta: float = 0.0
    amp_delta: float = 0.0
    cycle: int = 0
    period: int | None = None
    reshape: str = "shuffle"  # deviant cycle: "shuffle" or "zigzag"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ParameterError(f"unknown series anomaly {self.variant!r}; known: {', '.join(VARIANTS)}")
        if not 0 < self.decay < 1:
            raise ParameterError("decay must lie in (0, 1)")
        if self.variant in ("innovational", "deviant_cycle") and (self.period is None or self.period < 2):
            raise ParameterError(f"{self.variant} needs period >= 2")
        if self.reshape not in ("zigzag", "shuffle"):
            raise ParameterError(f"unknown reshape {self.reshape!r}")


def lag_autocorrelation(x: np.ndarray, lag: int) -> float:
    if lag >= x.size:
        return 0.0
    a, b = x[:-lag] - x.mean(), x[lag:] - x.mean()
    denom = np.dot(x - x.mean(), x - x.mean())
    return float(np.dot(a, b) / denom) if denom > 0 else 0.0


def _deviant_cycle(values: np.ndarray, start: int, period: int, reshape: str, rng) -> np.ndarray:
    seg = values[start : start + period]
    if reshape == "shuffle":
        return rng.permutation(seg)
    # alternate high and low values of the cycle itself: same value set, new shape
    s = np.sort(seg)
    out = np.empty_like(s)
    out[0::2] = s[::-1][: (s.size + 1) // 2]
    out[1::2] = s[: s.size // 2]
    return out


def inject_series_anomaly(
    series: Dataset, kind: SeriesAnomaly, seed: int = 0, *, k_extreme: float = 3.0
) -> tuple[Dataset, GroundTruth, frozenset[AnomalyType]]:
    """Apply one anomaly and map it onto the grid.

    The mapped set depends on whether an affected point is extreme for the
    modified series as a whole (robust z above ``k_extreme``).
    """
    check_series(series)
    ds = series.sorted_by_id()
    t = ds[TIME]
    x = ds[VALUE].copy()
    n = x.size
    rng = np.random.default_rng(seed)
    i0 = kind.t0 - int(t[0]) if n else 0
    if kind.variant == "deviant_cycle":
        i0 = kind.cycle * kind.period
        if kind.cycle < 0 or i0 + kind.period > n:
            raise ParameterError(f"cycle {kind.cycle} is not a complete cycle of this series")
        if lag_autocorrelation(x, kind.period) < 0.5:
            raise ParameterError(f"deviant_cycle needs a periodic series (lag-{kind.period} autocorrelation < 0.5)")
    elif not 0 <= i0 < n:
        raise ParameterError(f"t0={kind.t0} outside the series time range")

    steps = np.arange(n) - i0
    if kind.variant == "additive":
        x[i0] += kind.magnitude
        hit = [i0]
    elif kind.variant == "transitory_change":
        after = steps >= 0
        x[after] += kind.magnitude * kind.decay ** steps[after]
        hit = [int(i) for i in np.flatnonzero(after & (kind.decay ** np.clip(steps, 0, None) >= 0.05))]
    elif kind.variant == "level_shift":
        x[i0:] += kind.magnitude
        hit = [i0]
    elif kind.variant == "innovational":
        after = steps >= 0
        x[after] += kind.slope_delta * steps[after] + kind.amp_delta * np.sin(2 * np.pi * t[after] / kind.period)
        hit = [i0]
    else:
        x[i0 : i0 + kind.period] = _deviant_cycle(x, i0, kind.period, kind.reshape, rng)
        hit = list(range(i0, i0 + kind.period))

    s = column_stats(x)
    z = deviation_scores(x[hit], s.median, s.mad)
    extreme = bool(np.any(z > k_extreme))
    mapped = map_external(ExternalTypeLabel("kaiser", kind.variant), globally_extreme=extreme, dependent_data=True)
    (atype,) = mapped
    attrs = (VALUE,) if atype is AnomalyType.EXTREME_VALUE else (TIME, VALUE)
    params = {"variant": kind.variant, "t0": int(t[i0]), "globally_extreme": extreme}
    truth = GroundTruth([TruthEntry(int(ds.case_ids[i]), atype, attrs, None, params) for i in hit])
    out = Dataset(SERIES_SCHEMA, {TIME: t, VALUE: x}, case_ids=ds.case_ids)
    return out, truth, mapped


def difference(series: Dataset) -> Dataset:
    """First differences, each stamped with the later of its two time points."""
    check_series(series)
    if len(series) < 2:
        raise ParameterError("differencing needs at least 2 points")
    ds = series.sorted_by_id()
    t = ds[TIME][1:]
    return Dataset(SERIES_SCHEMA, {TIME: t, VALUE: np.diff(ds[VALUE])}, case_ids=t.astype(np.int64))


def integrate(diffs: Dataset, initial: float) -> Dataset:
    """Inverse of :func:`difference` given the first value of the original series."""
    check_series(diffs)
    ds = diffs.sorted_by_id()
    start = int(ds[TIME][0]) - 1 if len(ds) else 0
    values = np.concatenate([[initial], initial + np.cumsum(ds[VALUE])])
    return series_from_values(values, start)


def shuffle_series(series: Dataset, seed: int) -> Dataset:
    """Randomly reorder the values over the existing time points."""
    check_series(series)
    ds = series.sorted_by_id()
    perm = np.random.default_rng(seed).permutation(len(ds))
    return Dataset(SERIES_SCHEMA, {TIME: ds[TIME], VALUE: ds[VALUE][perm]}, case_ids=ds.case_ids)


# ---------------------------------------------------------------------------
# cycles
# ---------------------------------------------------------------------------

CYCLE_SCHEMA = Schema.of(
    ("cycle", "continuous"),
    ("mean", "continuous"),
    ("min", "continuous"),
    ("max", "continuous"),
    ("amplitude", "continuous"),
    ("shape", "categorical"),
    dependency="cycle",
)


def assign_cycle_classes(cycles: np.ndarray, cutoff: float) -> tuple[np.ndarray, np.ndarray]:
    """Leader clustering: each cycle joins the nearest class centroid within
    ``cutoff`` (Euclidean), else opens a new class. Centroids are running means.

    Returns ``(labels, centroids)``.
    """
    centroids: list[np.ndarray] = []
    sizes: list[int] = []
    labels = np.empty(len(cycles), dtype=np.int64)
    for i, c in enumerate(cycles):
        if centroids:
            d = np.linalg.norm(np.asarray(centroids) - c, axis=1)
            j = int(np.argmin(d))
            if d[j] <= cutoff:
                sizes[j] += 1
                centroids[j] = centroids[j] + (c - centroids[j]) / sizes[j]
                labels[i] = j
                continue
        centroids.append(c.astype(np.float64))
        sizes.append(1)
        labels[i] = len(centroids) - 1
    return labels, np.asarray(centroids)


def segment_cycles(series: Dataset, period: int, cutoff: float | None = None) -> Dataset:
    """One case per complete cycle with summary features and a shape class.

    The default ``cutoff`` is a quarter of the value range times
    ``sqrt(period)``, i.e. an average per-point gap of a quarter range.
    """
    check_series(series)
    if period < 2:
        raise ParameterError("period must be >= 2")
    x = series_values(series)
    if period > x.size:
        raise ParameterError(f"period {period} exceeds series length {x.size}")
    m = x.size // period
    cycles = x[: m * period].reshape(m, period)
    if cutoff is None:
        cutoff = 0.25 * float(np.ptp(x)) * np.sqrt(period)
    labels, _ = assign_cycle_classes(cycles, cutoff)
    cols = {
        "cycle": np.arange(m, dtype=np.float64),
        "mean": cycles.mean(axis=1),
        "min": cycles.min(axis=1),
        "max": cycles.max(axis=1),
        "amplitude": np.ptp(cycles, axis=1),
        "shape": np.array([f"c{j}" for j in labels], dtype=object),
    }
    return Dataset(CYCLE_SCHEMA, cols)


# ---------------------------------------------------------------------------
# symbol sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SymbolSequence:
    tokens: tuple[str, ...]
    alphabet: frozenset[str] = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(str(t) for t in self.tokens))
        if self.alphabet is None:
            object.__setattr__(self, "alphabet", frozenset(self.tokens))
        else:
            object.__setattr__(self, "alphabet", frozenset(self.alphabet))
        bad = sorted(set(self.tokens) - self.alphabet)
        if bad:
            raise DataError(f"tokens not in alphabet: {bad}")

    def __len__(self):
        return len(self.tokens)


def load_symbols(source: IO[str] | str) -> SymbolSequence:
    """One token per line; blank lines are skipped."""
    if isinstance(source, str):
        with open(source, encoding="utf-8") as fh:
            return load_symbols(fh)
    return SymbolSequence(tuple(line.strip() for line in source if line.strip()))


def windowize(sequence: SymbolSequence | Sequence[str], width: int) -> Dataset:
    """Sliding windows as cases with categorical attributes ``w0..w{width-1}``."""
    tokens = sequence.tokens if isinstance(sequence, SymbolSequence) else tuple(map(str, sequence))
    if not 2 <= width <= len(tokens):
        raise ParameterError(f"width must lie in [2, {len(tokens)}], got {width}")
    m = len(tokens) - width + 1
    names = [f"w{j}" for j in range(width)]
    schema = Schema.of(("position", "continuous"), *((nm, "categorical") for nm in names), dependency="position")
    cols = {"position": np.arange(m, dtype=np.float64)}
    for j, nm in enumerate(names):
        cols[nm] = np.array(tokens[j : j + m], dtype=object)
    return Dataset(schema, cols)


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------

AGGREGATIONS = ("mean", "min", "max", "count", "mode")


def _mode(values: np.ndarray):
    counts = Counter(values.tolist())
    top = max(counts.values())
    return min(v for v, c in counts.items() if c == top)


def aggregate_by(dataset: Dataset, key: str, aggregations: Iterable[tuple[str, str]]) -> Dataset:
    """One case per distinct ``key`` value (sorted), with ``{attr}_{agg}`` columns.

    ``mean``/``min``/``max`` need a continuous attribute; ``mode`` works on
    both kinds (ties go to the smallest value); ``count`` gives group sizes.
    """
    schema = dataset.schema
    if key not in schema.names:
        raise ParameterError(f"unknown group key {key!r}")
    aggregations = list(aggregations)
    out_attrs = [Attribute(key, schema.kind(key))]
    for attr, agg in aggregations:
        if attr not in schema.names:
            raise ParameterError(f"unknown attribute {attr!r}")
        if agg not in AGGREGATIONS:
            raise ParameterError(f"unknown aggregation {agg!r}; known: {', '.join(AGGREGATIONS)}")
        if agg in ("mean", "min", "max") and schema.kind(attr) is not AttributeKind.CONTINUOUS:
            raise ParameterError(f"{agg} needs a continuous attribute, {attr!r} is categorical")
        kind = schema.kind(attr) if agg == "mode" else AttributeKind.CONTINUOUS
        out_attrs.append(Attribute(f"{attr}_{agg}", kind))
    out_schema = Schema(tuple(out_attrs))
    ds = dataset.sorted_by_id()
    keys = ds[key]
    groups = sorted(set(keys.tolist()))
    cols: dict[str, list] = {a.name: [] for a in out_attrs}
    for g in groups:
        rows = keys == g
        cols[key].append(g)
        for attr, agg in aggregations:
            v = ds[attr][rows]
            name = f"{attr}_{agg}"
            if agg == "count":
                cols[name].append(float(v.size))
            elif agg == "mode":
                cols[name].append(_mode(v))
            else:
                cols[name].append(float(getattr(np, agg)(v)))
    return Dataset(out_schema, cols)
