"""
The six anomaly types, their position on the data-kind x cardinality grid,
and the mapping of labels from other typologies onto that grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import ParameterError

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
UNIVARIATE = "univariate"
MULTIVARIATE = "multivariate"
GLOBAL = "global"
LOCAL = "local"


class AnomalyType(Enum):
    EXTREME_VALUE = "I"
    RARE_CLASS = "II"
    SIMPLE_MIXED = "III"
    MULTIDIM_NUMERICAL = "IV"
    MULTIDIM_RARE_CLASS = "V"
    MULTIDIM_MIXED = "VI"

    @property
    def roman(self) -> str:
        return self.value

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def parse(cls, text: str) -> "AnomalyType":
        """Accept a roman numeral (``"IV"``), a member name, or ``"type4"``."""
        t = str(text).strip()
        for member in cls:
            if t.upper() == member.value or t.upper() == member.name:
                return member
        if t.lower().startswith("type") and t[4:].isdigit():
            idx = int(t[4:]) - 1
            if 0 <= idx < len(cls):
                return list(cls)[idx]
        raise ParameterError(f"unknown anomaly type {text!r}")

    def __lt__(self, other):
        order = list(AnomalyType)
        return order.index(self) < order.index(other)


_LABELS = {
    AnomalyType.EXTREME_VALUE: "Extreme value anomaly",
    AnomalyType.RARE_CLASS: "Rare class anomaly",
    AnomalyType.SIMPLE_MIXED: "Simple mixed data anomaly",
    AnomalyType.MULTIDIM_NUMERICAL: "Multidimensional numerical anomaly",
    AnomalyType.MULTIDIM_RARE_CLASS: "Multidimensional rare class anomaly",
    AnomalyType.MULTIDIM_MIXED: "Multidimensional mixed data anomaly",
}


@dataclass(frozen=True)
class TypeProperties:
    data_kinds: frozenset[str]
    cardinality: str
    locality: str

    @property
    def mixed(self) -> bool:
        return len(self.data_kinds) == 2


_KINDS = {
    "continuous": frozenset({CONTINUOUS}),
    "categorical": frozenset({CATEGORICAL}),
    "mixed": frozenset({CONTINUOUS, CATEGORICAL}),
}

# (data-kind column, cardinality row) of each grid cell.
GRID = {
    AnomalyType.EXTREME_VALUE: ("continuous", UNIVARIATE),
    AnomalyType.RARE_CLASS: ("categorical", UNIVARIATE),
    AnomalyType.SIMPLE_MIXED: ("mixed", UNIVARIATE),
    AnomalyType.MULTIDIM_NUMERICAL: ("continuous", MULTIVARIATE),
    AnomalyType.MULTIDIM_RARE_CLASS: ("categorical", MULTIVARIATE),
    AnomalyType.MULTIDIM_MIXED: ("mixed", MULTIVARIATE),
}


def locality(t: AnomalyType) -> str:
    # Univariate deviance holds regardless of other attributes; joint deviance is situational.
    return GLOBAL if GRID[t][1] == UNIVARIATE else LOCAL


def type_properties(t: AnomalyType) -> TypeProperties:
    column, cardinality = GRID[t]
    return TypeProperties(_KINDS[column], cardinality, locality(t))


def type_at(data_kinds, cardinality: str) -> AnomalyType:
    """Inverse grid lookup."""
    kinds = frozenset(data_kinds)
    for t, (column, card) in GRID.items():
        if _KINDS[column] == kinds and card == cardinality:
            return t
    raise ParameterError(f"no grid cell for {sorted(kinds)} x {cardinality}")


# ---------------------------------------------------------------------------
# External typologies
# ---------------------------------------------------------------------------

EXTERNAL_VOCABULARY = {
    # point / contextual / collective typology
    "chandola": ("point", "contextual", "collective"),
    # within-series time-series outlier typology, plus deviant cycles
    "kaiser": ("additive", "transitory_change", "level_shift", "innovational", "deviant_cycle"),
}

_DEPENDENT_ONLY = {"collective", *EXTERNAL_VOCABULARY["kaiser"]}


@dataclass(frozen=True)
class ExternalTypeLabel:
    source: str
    label: str

    def __post_init__(self):
        vocab = EXTERNAL_VOCABULARY.get(self.source)
        if vocab is None:
            raise ParameterError(
                f"unknown typology source {self.source!r}; known: {sorted(EXTERNAL_VOCABULARY)}"
            )
        if self.label not in vocab:
            raise ParameterError(f"label {self.label!r} not in {self.source} vocabulary {vocab}")


def map_external(
    label: ExternalTypeLabel | tuple[str, str],
    *,
    globally_extreme: bool = False,
    dependent_data: bool = False,
) -> frozenset[AnomalyType]:
    """Candidate grid types for a label from another typology.

    ``globally_extreme`` says whether the affected values are extreme for the
    attribute as a whole; it splits spikes into extreme-value anomalies and
    anomalies that only deviate from the local pattern.
    """
    if not isinstance(label, ExternalTypeLabel):
        label = ExternalTypeLabel(*label)
    name = label.label
    if name in _DEPENDENT_ONLY and not dependent_data:
        raise ParameterError(f"{label.source}:{name} requires dependent data")
    T = AnomalyType
    if name == "point":
        return frozenset(T)
    if name == "contextual":
        return frozenset({T.MULTIDIM_NUMERICAL, T.MULTIDIM_RARE_CLASS, T.MULTIDIM_MIXED})
    if name == "collective":
        return frozenset({T.MULTIDIM_NUMERICAL, T.MULTIDIM_RARE_CLASS})
    if name in ("additive", "transitory_change"):
        return frozenset({T.EXTREME_VALUE if globally_extreme else T.MULTIDIM_NUMERICAL})
    return frozenset({T.MULTIDIM_NUMERICAL})


# ---------------------------------------------------------------------------
# Terminology
# ---------------------------------------------------------------------------

GLOSSARY = {
    "anomaly": "Umbrella term: a case that does not fit the general patterns of the dataset.",
    "deviant": "Synonym of anomaly.",
    "outlier": "A case in a numerically isolated region: types I, III and, for independent data, IV.",
    "novelty": "A case representing a previously unseen event or object (change points, one-class settings).",
    "univariate anomaly": "Deviant on individual attributes analysed independently (types I-III); always global.",
    "multivariate anomaly": "Deviant only in the joint behaviour of several attributes (types IV-VI); always local.",
    "dependent data": "Rows linked by a time, space or identity attribute; needed for collective anomalies.",
    "contextual anomaly": "Deviant only given explicitly denoted context attributes; a special case of types IV-VI.",
    "collective anomaly": "A group of related cases deviant as a whole; handled via windowing/segmentation.",
    "order": "Number of categorical attributes whose value combination is locally rare (type VI).",
    "conceptual level": "Granularity at which cases are defined (point, window, cycle, session).",
}

# Which grid types the stricter terms apply to.
TERM_TYPES = {
    "outlier": frozenset(
        {AnomalyType.EXTREME_VALUE, AnomalyType.SIMPLE_MIXED, AnomalyType.MULTIDIM_NUMERICAL}
    ),
    "anomaly": frozenset(AnomalyType),
    "deviant": frozenset(AnomalyType),
}
