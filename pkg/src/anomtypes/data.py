"""
Dataset representation, schema handling, CSV I/O and marginal statistics.

A :class:`Dataset` is an immutable, column-oriented table. Continuous columns
are ``float64`` arrays, categorical columns are object arrays of ``str``.
Every row carries a ``case_id`` that survives reordering and subsetting; all
downstream outputs (scores, ground truth, attributions) are keyed by it.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import DataError, ParameterError

MAD_SCALE = 1.4826


class AttributeKind(str, Enum):
    CONTINUOUS = "continuous"
    CATEGORICAL = "categorical"


@dataclass(frozen=True)
class Attribute:
    name: str
    kind: AttributeKind

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise DataError("attribute names must be non-empty strings")
        object.__setattr__(self, "kind", AttributeKind(self.kind))


@dataclass(frozen=True)
class Schema:
    attributes: tuple[Attribute, ...]
    dependency: str | None = None

    def __post_init__(self):
        attrs = tuple(
            a if isinstance(a, Attribute) else Attribute(*a) for a in self.attributes
        )
        object.__setattr__(self, "attributes", attrs)
        names = [a.name for a in attrs]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise DataError(f"duplicate attribute names: {dupes}")
        if self.dependency is not None and self.dependency not in names:
            raise DataError(f"dependency attribute {self.dependency!r} not in schema")

    @classmethod
    def of(cls, *pairs: tuple[str, str], dependency: str | None = None) -> "Schema":
        """Shorthand: ``Schema.of(("x", "continuous"), ("color", "categorical"))``."""
        return cls(tuple(Attribute(n, AttributeKind(k)) for n, k in pairs), dependency)

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    def kind(self, name: str) -> AttributeKind:
        for a in self.attributes:
            if a.name == name:
                return a.kind
        raise KeyError(name)

    def continuous(self, *, substantive: bool = False) -> list[str]:
        """Continuous attribute names; ``substantive`` drops the dependency attribute."""
        return [
            a.name
            for a in self.attributes
            if a.kind is AttributeKind.CONTINUOUS
            and not (substantive and a.name == self.dependency)
        ]

    def categorical(self, *, substantive: bool = False) -> list[str]:
        return [
            a.name
            for a in self.attributes
            if a.kind is AttributeKind.CATEGORICAL
            and not (substantive and a.name == self.dependency)
        ]

    def to_json(self) -> dict:
        return {
            "attributes": [{"name": a.name, "kind": a.kind.value} for a in self.attributes],
            "dependency": self.dependency,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "Schema":
        try:
            attrs = tuple(Attribute(a["name"], AttributeKind(a["kind"])) for a in obj["attributes"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"invalid schema document: {exc}") from exc
        return cls(attrs, obj.get("dependency"))


class Dataset:
    """Immutable rectangular collection of cases over a :class:`Schema`."""

    __slots__ = ("schema", "_columns", "case_ids", "_pos")

    def __init__(self, schema: Schema, columns: Mapping[str, Sequence], case_ids=None):
        self.schema = schema
        cols = {}
        n = None
        for attr in schema.attributes:
            if attr.name not in columns:
                raise DataError(f"missing column {attr.name!r}")
            raw = columns[attr.name]
            if attr.kind is AttributeKind.CONTINUOUS:
                arr = np.array(raw, dtype=np.float64).reshape(-1)
                if not np.all(np.isfinite(arr)):
                    bad = int(np.flatnonzero(~np.isfinite(arr))[0])
                    raise DataError(f"non-finite value in column {attr.name!r} at row {bad}")
            else:
                arr = np.empty(len(raw), dtype=object)
                for i, v in enumerate(raw):
                    if not isinstance(v, str):
                        raise DataError(
                            f"categorical column {attr.name!r} row {i}: expected str, got {type(v).__name__}"
                        )
                    arr[i] = v
            if n is None:
                n = len(arr)
            elif len(arr) != n:
                raise DataError(f"column {attr.name!r} has {len(arr)} rows, expected {n}")
            arr.flags.writeable = False
            cols[attr.name] = arr
        extra = set(columns) - set(schema.names)
        if extra:
            raise DataError(f"columns not in schema: {sorted(extra)}")
        n = 0 if n is None else n
        ids = np.arange(n, dtype=np.int64) if case_ids is None else np.array(case_ids, dtype=np.int64)
        if ids.shape != (n,):
            raise DataError(f"expected {n} case ids, got {ids.size}")
        if np.unique(ids).size != n:
            raise DataError("case ids must be unique")
        ids.flags.writeable = False
        self._columns = cols
        self.case_ids = ids
        self._pos = None

    @classmethod
    def from_rows(cls, schema: Schema, rows: Iterable[Sequence], case_ids=None) -> "Dataset":
        rows = [list(r) for r in rows]
        width = len(schema.attributes)
        for i, r in enumerate(rows):
            if len(r) != width:
                raise DataError(f"row {i} has {len(r)} values, expected {width}")
        columns = {a.name: [r[j] for r in rows] for j, a in enumerate(schema.attributes)}
        return cls(schema, columns, case_ids)

    def __len__(self) -> int:
        return int(self.case_ids.size)

    @property
    def n(self) -> int:
        return len(self)

    def __repr__(self):
        return f"Dataset(n={len(self)}, attributes={self.schema.names})"

    def column(self, name: str) -> np.ndarray:
        return self._columns[name]

    def __getitem__(self, name: str) -> np.ndarray:
        return self._columns[name]

    @property
    def columns(self) -> dict[str, np.ndarray]:
        return dict(self._columns)

    def rows(self) -> Iterator[tuple]:
        cols = [self._columns[a] for a in self.schema.names]
        for i in range(len(self)):
            yield tuple(c[i].item() if isinstance(c[i], np.generic) else c[i] for c in cols)

    def position(self, case_id: int) -> int:
        if self._pos is None:
            self._pos = {int(c): i for i, c in enumerate(self.case_ids)}
        try:
            return self._pos[int(case_id)]
        except KeyError:
            raise KeyError(f"unknown case_id {case_id}") from None

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        """Stack continuous columns into an ``(n, len(names))`` float array."""
        if not names:
            return np.zeros((len(self), 0))
        return np.column_stack([self._columns[nm] for nm in names]).astype(np.float64)

    def take(self, positions) -> "Dataset":
        positions = np.asarray(positions, dtype=np.int64)
        cols = {k: v[positions] for k, v in self._columns.items()}
        return Dataset(self.schema, cols, self.case_ids[positions])

    def sorted_by_id(self) -> "Dataset":
        order = np.argsort(self.case_ids, kind="stable")
        if np.array_equal(order, np.arange(len(self))):
            return self
        return self.take(order)

    def with_columns(self, updates: Mapping[str, Sequence], schema: Schema | None = None) -> "Dataset":
        """Copy with some columns replaced (same case ids)."""
        schema = schema or self.schema
        cols = {nm: self._columns[nm] for nm in schema.names if nm in self._columns}
        cols.update(updates)
        return Dataset(schema, cols, self.case_ids)

    def append(self, other: "Dataset") -> "Dataset":
        if other.schema != self.schema:
            raise DataError("cannot append datasets with different schemas")
        cols = {
            nm: np.concatenate([self._columns[nm], other._columns[nm]]) for nm in self.schema.names
        }
        return Dataset(self.schema, cols, np.concatenate([self.case_ids, other.case_ids]))

    def next_case_id(self) -> int:
        return int(self.case_ids.max()) + 1 if len(self) else 0

    def equals(self, other: "Dataset") -> bool:
        return (
            self.schema == other.schema
            and np.array_equal(self.case_ids, other.case_ids)
            and all(np.array_equal(self._columns[k], other._columns[k]) for k in self.schema.names)
        )


# ---------------------------------------------------------------------------
# CSV / JSON I/O
# ---------------------------------------------------------------------------


def load_schema(source: IO[str] | str) -> Schema:
    if isinstance(source, str):
        with open(source, encoding="utf-8") as fh:
            return Schema.from_json(json.load(fh))
    return Schema.from_json(json.load(source))


def dump_schema(schema: Schema, fh: IO[str]) -> None:
    json.dump(schema.to_json(), fh, indent=2, sort_keys=True)
    fh.write("\n")


def load_dataset(source: IO[str] | str, schema: Schema) -> Dataset:
    """Parse CSV text (a stream, or a path) into a validated dataset.

    Row numbers in error messages are 1-based over data rows (the header is row 0).
    """
    if isinstance(source, str):
        with open(source, encoding="utf-8", newline="") as fh:
            return load_dataset(fh, schema)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty input: missing header row") from None
    header = [h.strip() for h in header]
    if header != schema.names:
        raise DataError(f"header mismatch: got {header}, expected {schema.names}")
    kinds = [a.kind for a in schema.attributes]
    columns: list[list] = [[] for _ in kinds]
    for rowno, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != len(kinds):
            raise DataError(f"row {rowno}: ragged row with {len(row)} fields, expected {len(kinds)}")
        for j, (tok, kind) in enumerate(zip(row, kinds)):
            name = schema.names[j]
            tok = tok.strip()
            if tok == "":
                raise DataError(f"row {rowno}, column {name!r}: missing value")
            if kind is AttributeKind.CONTINUOUS:
                try:
                    v = float(tok)
                except ValueError:
                    raise DataError(f"row {rowno}, column {name!r}: non-numeric token {tok!r}") from None
                if not math.isfinite(v):
                    raise DataError(f"row {rowno}, column {name!r}: non-finite value {tok!r}")
                columns[j].append(v)
            else:
                columns[j].append(tok)
    return Dataset(schema, {nm: col for nm, col in zip(schema.names, columns)})


def format_value(v) -> str:
    # repr of a Python float is the shortest string that round-trips exactly.
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def dump_dataset(dataset: Dataset, fh: IO[str]) -> None:
    """Write CSV rows in ascending case_id order (ids are positional on reload)."""
    ds = dataset.sorted_by_id()
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(ds.schema.names)
    for row in ds.rows():
        writer.writerow([format_value(v) for v in row])


def dumps_dataset(dataset: Dataset) -> str:
    buf = io.StringIO()
    dump_dataset(dataset, buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Marginal statistics and standardization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ContinuousStats:
    mean: float
    median: float
    sd: float  # population divisor n
    mad: float  # scaled by MAD_SCALE
    raw_mad: float
    min: float
    max: float


@dataclass(frozen=True)
class MarginalStats:
    n: int
    continuous: dict[str, ContinuousStats] = field(default_factory=dict)
    categorical: dict[str, dict[str, tuple[int, float]]] = field(default_factory=dict)

    def center(self, name: str, method: str) -> float:
        s = self.continuous[name]
        return s.median if method in ("mad", "robust") else s.mean

    def scale(self, name: str, method: str) -> float:
        s = self.continuous[name]
        return s.mad if method in ("mad", "robust") else s.sd


def column_stats(x: np.ndarray) -> ContinuousStats:
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return ContinuousStats(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    med = float(np.median(x))
    raw = float(np.median(np.abs(x - med)))
    return ContinuousStats(
        mean=float(np.mean(x)),
        median=med,
        sd=float(np.std(x)),
        mad=raw * MAD_SCALE,
        raw_mad=raw,
        min=float(np.min(x)),
        max=float(np.max(x)),
    )


def label_counts(values: np.ndarray) -> dict[str, tuple[int, float]]:
    n = len(values)
    labels, counts = np.unique(values.astype(str), return_counts=True) if n else ([], [])
    return {str(lab): (int(c), int(c) / n) for lab, c in zip(labels, counts)}


def marginal_stats(dataset: Dataset) -> MarginalStats:
    # Computed on id-sorted rows so results do not depend on row order.
    ds = dataset.sorted_by_id()
    return MarginalStats(
        n=len(ds),
        continuous={nm: column_stats(ds[nm]) for nm in ds.schema.continuous()},
        categorical={nm: label_counts(ds[nm]) for nm in ds.schema.categorical()},
    )


def scale_column(x: np.ndarray, center: float, scale: float) -> np.ndarray:
    """``(x - center) / scale``; a zero scale maps every value to 0."""
    if scale == 0:
        return np.zeros_like(x, dtype=np.float64)
    return (x - center) / scale


def standardize(dataset: Dataset, method: str = "zscore") -> Dataset:
    """Replace continuous values by z-scores (``zscore``) or robust z-scores (``robust``)."""
    if method not in ("zscore", "robust"):
        raise ParameterError(f"unknown standardization method {method!r}")
    names = dataset.schema.continuous()
    if not names:
        raise ParameterError("standardize requires at least one continuous attribute")
    stats = marginal_stats(dataset)
    updates = {
        nm: scale_column(dataset[nm], stats.center(nm, method), stats.scale(nm, method))
        for nm in names
    }
    return dataset.with_columns(updates)
