"""
Command-line interface.

Exit status: 0 on success, 1 on usage errors, 2 on data or validation
errors. Diagnostics go to stderr; data goes to files under ``-o`` or, when
no output directory is given, to stdout.

Every subcommand also accepts ``--config FILE``: a JSON object whose keys
are the flag names (with underscores); flags given on the command line win.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from dataclasses import fields
from typing import Callable

from .classify import classify_cases
from .data import Dataset, dump_schema, dumps_dataset, load_dataset, load_schema
from .detectors import DETECTORS, DetectorParams, run_detector
from .errors import AnomtypesError
from .evaluation import EvaluationReport, benchmark_id, evaluate_scores, load_external_scores
from .injector import BaseSpec, GroundTruth, InjectionSpec, generate_base, inject_all
from .plot import scatter_svg
from .sequence import (
    SeriesAnomaly,
    aggregate_by,
    difference,
    generate_series,
    inject_series_anomaly,
    load_symbols,
    segment_cycles,
    windowize,
)
from .taxonomy import AnomalyType


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------


def _dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _schema_text(schema) -> str:
    buf = io.StringIO()
    dump_schema(schema, buf)
    return buf.getvalue()


def _dataset_artifacts(stem: str, ds: Dataset) -> dict[str, str]:
    return {f"{stem}.csv": dumps_dataset(ds), f"{stem}.schema.json": _schema_text(ds.schema)}


def _need(args, *names):
    for nm in names:
        if getattr(args, nm, None) in (None, ""):
            raise UsageError(f"{args.command}: --{nm.replace('_', '-')} is required")


def _read_data(args) -> Dataset:
    _need(args, "data")
    schema_path = args.schema
    if schema_path is None:
        stem = args.data[:-4] if args.data.endswith(".csv") else args.data
        schema_path = stem + ".schema.json"
    return load_dataset(args.data, load_schema(schema_path))


def _params(args, truth: GroundTruth | None = None) -> DetectorParams:
    base = truth.detector_params().to_dict() if truth is not None and truth.thresholds else {}
    given = {f.name: getattr(args, f.name) for f in fields(DetectorParams) if getattr(args, f.name, None) is not None}
    return DetectorParams.from_dict({**base, **given})


def _load_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# commands; each returns {file name: text}
# ---------------------------------------------------------------------------


def cmd_generate(args) -> dict[str, str]:
    if args.kind == "series":
        _need(args, "n")
        ds = generate_series(args.n, args.slope, args.amplitude, args.period, args.noise, args.seed or 0)
        return _dataset_artifacts("series", ds)
    _need(args, "spec")
    spec = _load_json(args.spec)
    if args.seed is not None:
        spec["seed"] = args.seed
    if args.n is not None:
        spec["n_cases"] = args.n
    return _dataset_artifacts("base", generate_base(BaseSpec.from_json(spec)))


def cmd_inject(args) -> dict[str, str]:
    ds = _read_data(args)
    if args.variant:
        kind = SeriesAnomaly(
            args.variant,
            t0=args.t0,
            magnitude=args.magnitude,
            decay=args.decay,
            slope_delta=args.slope_delta,
            amp_delta=args.amp_delta,
            cycle=args.cycle,
            period=args.period,
        )
        out, truth, mapped = inject_series_anomaly(ds, kind, args.seed or 0)
        arts = _dataset_artifacts("series", out)
        arts["truth.json"] = _dumps_json(truth.to_json())
        return arts
    _need(args, "spec")
    spec = _load_json(args.spec)
    if args.seed is not None:
        spec["seed"] = args.seed
    if args.count is not None:
        spec["counts"] = {t.value: args.count for t in AnomalyType}
    out, truth = inject_all(ds, InjectionSpec.from_json(spec))
    arts = _dataset_artifacts("benchmark", out)
    arts["truth.json"] = _dumps_json(truth.to_json())
    return arts


def _scores_csv(sv) -> str:
    buf = io.StringIO()
    sv.write_csv(buf)
    return buf.getvalue()


def cmd_detect(args) -> dict[str, str]:
    _need(args, "detector")
    ds = _read_data(args)
    truth = GroundTruth.load(args.truth) if args.truth else None
    arts = {}
    for det in args.detector.split(","):
        sv = run_detector(det.strip(), ds, _params(args, truth))
        if args.format == "json":
            doc = sv.sidecar()
            doc["scores"] = [
                {"case_id": int(c), "score": float(f"{s:.12g}"), "flag": None if sv.flags is None else bool(f)}
                for c, s, f in zip(sv.case_ids, sv.scores, sv.flags if sv.flags is not None else sv.scores)
            ]
            arts[f"scores_{sv.detector_id}.json"] = _dumps_json(doc)
        else:
            arts[f"scores_{sv.detector_id}.csv"] = _scores_csv(sv)
            arts[f"scores_{sv.detector_id}.params.json"] = _dumps_json(sv.sidecar())
    return arts


def cmd_classify(args) -> dict[str, str]:
    ds = _read_data(args)
    truth = GroundTruth.load(args.truth) if args.truth else None
    ids = None
    if args.case_ids:
        ids = [int(c) for c in args.case_ids.split(",")]
    elif args.truth_only and truth is not None:
        ids = truth.ids()
    result = classify_cases(ds, ids, _params(args, truth), multi_label=args.multi_label)
    if args.format == "csv":
        lines = ["case_id,type,order"]
        lines += [
            f"{a.case_id},{a.primary_type.value if a.primary_type else 'none'},{'' if a.order is None else a.order}"
            for a in result
        ]
        return {"classification.csv": "\n".join(lines) + "\n"}
    doc = [a.to_json() for a in result]
    return {"classification.json": json.dumps(doc, indent=2, sort_keys=True, default=_float12) + "\n"}


def _float12(o):
    return float(o)


def cmd_transform(args) -> dict[str, str]:
    op = args.op
    if op == "windowize":
        _need(args, "symbols", "width")
        return _dataset_artifacts("windows", windowize(load_symbols(args.symbols), args.width))
    ds = _read_data(args)
    if op == "difference":
        return _dataset_artifacts("difference", difference(ds))
    if op == "segment":
        _need(args, "period")
        return _dataset_artifacts("cycles", segment_cycles(ds, args.period, args.cutoff))
    _need(args, "key", "agg")
    aggs = []
    for item in args.agg:
        attr, sep, how = item.rpartition(":")
        if not sep:
            raise UsageError(f"transform aggregate: --agg expects ATTRIBUTE:AGGREGATION, got {item!r}")
        aggs.append((attr, how))
    return _dataset_artifacts("aggregated", aggregate_by(ds, args.key, aggs))


def cmd_evaluate(args) -> dict[str, str]:
    _need(args, "truth")
    ds = _read_data(args)
    truth = GroundTruth.load(args.truth)
    params = _params(args, truth)
    report = EvaluationReport(benchmark_id(ds), params=params.to_dict())
    if args.scores:
        for path in args.scores:
            sv = load_external_scores(path, ds.case_ids)
            report.add(evaluate_scores(sv, truth, ds))
    else:
        dets = args.detector.split(",") if args.detector else list(DETECTORS)
        for det in dets:
            report.add(evaluate_scores(run_detector(det.strip(), ds, params), truth, ds))
    return _report_artifacts(report, args.format)


def _report_artifacts(report: EvaluationReport, fmt: str) -> dict[str, str]:
    if fmt == "csv":
        buf = io.StringIO()
        report.write_csv(buf)
        return {"report.csv": buf.getvalue()}
    buf = io.StringIO()
    report.write_json(buf)
    return {"report.json": buf.getvalue()}


def cmd_report(args) -> dict[str, str]:
    _need(args, "report")
    report = EvaluationReport.from_json(_load_json(args.report))
    if args.format in ("csv", "json") and args.output_dir:
        arts = _report_artifacts(report, args.format)
    else:
        arts = {}
    metrics = args.metric.split(",") if args.metric else ["rank_auc", "recall_at_k", "recall"]
    arts["report.txt"] = "\n".join(report.table(m) for m in metrics)
    return arts


def cmd_plot(args) -> dict[str, str]:
    _need(args, "x", "y")
    ds = _read_data(args)
    anomalies = {}
    if args.truth:
        anomalies = {e.case_id: e.type for e in GroundTruth.load(args.truth).entries}
    elif args.classification:
        for a in _load_json(args.classification):
            if a["type"] != "none":
                anomalies[int(a["case_id"])] = AnomalyType.parse(a["type"])
    svg = scatter_svg(ds, args.x, args.y, anomalies, args.class_attr, args.title or "")
    return {"plot.svg": svg}


COMMANDS: dict[str, Callable] = {
    "generate": cmd_generate,
    "inject": cmd_inject,
    "detect": cmd_detect,
    "classify": cmd_classify,
    "transform": cmd_transform,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "plot": cmd_plot,
}


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--seed", type=int)
    p.add_argument("-o", "--output-dir")
    p.add_argument("--format", choices=("csv", "json"), help="default: csv for detect, json otherwise")
    p.add_argument("--config", help="JSON file of flag values (flags override it)")
    return p


def _data_flags() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--data", help="dataset CSV")
    p.add_argument("--schema", help="schema JSON (default: <data>.schema.json)")
    return p


def _detector_flags() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    g = p.add_argument_group("detector parameters")
    g.add_argument("--k-extreme", dest="k_extreme", type=float)
    g.add_argument("--method", choices=("sd", "mad"))
    g.add_argument("--leave-one-out", dest="leave_one_out", action="store_const", const=True)
    g.add_argument("--bins", type=int)
    g.add_argument("--tau-rare", dest="tau_rare", type=float)
    g.add_argument("--c-rare", dest="c_rare", type=int)
    g.add_argument("--knn", "--k-nn", dest="k_nn", type=int)
    g.add_argument("--standardize", choices=("robust", "zscore", "none"))
    g.add_argument("--epsilon", type=float)
    g.add_argument("--combo-order", dest="combo_order", type=int)
    g.add_argument("--g-min", dest="g_min", type=float)
    g.add_argument("--l-max", dest="l_max", type=float)
    return p


def build_parser() -> argparse.ArgumentParser:
    common, data, det = _common(), _data_flags(), _detector_flags()
    parser = _Parser(prog="anomtypes", description="Typed anomaly benchmarks and detector evaluation.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("generate", parents=[common], help="simulate a base dataset or series")
    p.add_argument("--kind", choices=("tabular", "series"), default="tabular")
    p.add_argument("--spec", help="base spec JSON (tabular)")
    p.add_argument("--n", type=int, help="number of cases / time points")
    p.add_argument("--slope", type=float, default=0.0)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--period", type=int, default=20)
    p.add_argument("--noise", type=float, default=0.0)

    p = sub.add_parser("inject", parents=[common, data], help="append ground-truth anomalies")
    p.add_argument("--spec", help="injection spec JSON")
    p.add_argument("--count", type=int, help="cases per type (overrides the spec counts)")
    p.add_argument("--variant", choices=("additive", "transitory_change", "level_shift", "innovational", "deviant_cycle"))
    p.add_argument("--t0", type=int, default=0)
    p.add_argument("--magnitude", type=float, default=0.0)
    p.add_argument("--decay", type=float, default=0.7)
    p.add_argument("--slope-delta", dest="slope_delta", type=float, default=0.0)
    p.add_argument("--amp-delta", dest="amp_delta", type=float, default=0.0)
    p.add_argument("--cycle", type=int, default=0)
    p.add_argument("--period", type=int)

    p = sub.add_parser("detect", parents=[common, data, det], help="score cases with reference detectors")
    p.add_argument("--detector", help=f"comma-separated ids: {', '.join(DETECTORS)}")
    p.add_argument("--truth", help="ground truth whose thresholds are used as defaults")

    p = sub.add_parser("classify", parents=[common, data, det], help="assign anomaly types")
    p.add_argument("--truth")
    p.add_argument("--case-ids", dest="case_ids", help="comma-separated case ids (default: all)")
    p.add_argument("--truth-only", dest="truth_only", action="store_true", help="classify only ground-truth cases")
    p.add_argument("--multi-label", dest="multi_label", action="store_true")

    p = sub.add_parser("transform", parents=[common, data], help="change the level at which cases are defined")
    p.add_argument("op", choices=("difference", "segment", "windowize", "aggregate"))
    p.add_argument("--period", type=int)
    p.add_argument("--cutoff", type=float)
    p.add_argument("--symbols", help="token file, one per line (windowize)")
    p.add_argument("--width", type=int)
    p.add_argument("--key")
    p.add_argument("--agg", action="append", help="ATTRIBUTE:{mean,min,max,count,mode}; repeatable")

    p = sub.add_parser("evaluate", parents=[common, data, det], help="per-type metrics against ground truth")
    p.add_argument("--truth")
    p.add_argument("--detector", help="comma-separated ids (default: all)")
    p.add_argument("--scores", action="append", help="external case_id,score CSV; repeatable")

    p = sub.add_parser("report", parents=[common], help="print a detector x type table")
    p.add_argument("--report", help="report JSON written by evaluate")
    p.add_argument("--metric", help="comma-separated metrics")

    p = sub.add_parser("plot", parents=[common, data], help="SVG scatter with typed anomalies")
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("--class-attr", dest="class_attr")
    p.add_argument("--truth")
    p.add_argument("--classification", help="classification JSON written by classify")
    p.add_argument("--title")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("anomtypes: a command is required (" + ", ".join(COMMANDS) + ")")
    if args.config:
        try:
            config = _load_json(args.config)
        except (OSError, json.JSONDecodeError) as exc:
            raise AnomtypesError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
        known = set(vars(args))
        unknown = sorted(set(config) - known)
        if unknown:
            raise UsageError(f"{args.command}: unknown config keys {unknown}")
        # reparse with config values as defaults so explicit flags still win
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        subparser.set_defaults(**config)
        args = parser.parse_args(argv)
    return args


def _emit(arts: dict[str, str], out_dir: str | None) -> None:
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        for name, text in arts.items():
            with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return
    many = len(arts) > 1
    for name, text in arts.items():
        if many:
            sys.stdout.write(f"==> {name} <==\n")
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _apply_config(build_parser(), argv)
        if args.format is None:
            args.format = "csv" if args.command == "detect" else "json"
        arts = COMMANDS[args.command](args)
        _emit(arts, args.output_dir)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (AnomtypesError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
