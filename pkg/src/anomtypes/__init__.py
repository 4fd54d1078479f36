"""Typed anomaly benchmarks: six-type taxonomy, reference detectors, injection and evaluation."""

from .classify import ClassificationParams, TypeAttribution, classify_case, classify_cases
from .data import Attribute, AttributeKind, Dataset, Schema, load_dataset, load_schema, marginal_stats, standardize
from .detectors import DETECTORS, DetectorParams, Evidence, ScoreVector, run_detector
from .errors import AnomtypesError, DataError, InjectionError, ParameterError
from .evaluation import EvaluationReport, cross_matrix, evaluate_scores, load_external_scores
from .injector import BaseSpec, GroundTruth, InjectionSpec, build_benchmark, generate_base, inject, inject_all
from .taxonomy import AnomalyType, locality, map_external, type_properties

__version__ = "0.1.0"
