"""Command-line entry point: run, validate, synth, eval, sweep."""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from .cypher import validate as grammar_validate
from .evaluation import GoldQueryError, aggregate, evaluate_question, reports_to_csv
from .executor import GraphFixtureError, HttpBackend, HttpConfig, MicroEngine, MicroGraph
from .pipeline import ConfigError, run_pipeline
from .schema import SchemaError, parse_schema
from .synth import GoldItem, SynthConfig, SynthError, default_gold_pool, default_graph, generate
from .traces import DatasetError, PipelineConfig, dumps_dataset, load_dataset
from .voting import EMPTY, Prediction

log = logging.getLogger("cypherfunnel")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

# config-file key -> PipelineConfig field
_CONFIG_KEYS = {
    "mode": "inference_mode",
    "grammar": "grammar_variant",
    "schema_filter": "schema_filter",
    "keep_ratio": "keep_ratio",
    "window": "window",
    "vote": "vote_mode",
    "seed": "seed",
    "schema_strict": "schema_strict",
    "schema_label_mode": "schema_label_mode",
    "warmup_fraction": "warmup_fraction",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _on_off(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("on", "true", "yes", "1"):
        return True
    if lowered in ("off", "false", "no", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {value!r}")


def _add_pipeline_flags(p: argparse.ArgumentParser, sweep: bool = False) -> None:
    p.add_argument("--config", type=Path, help="flat JSON file of option defaults")
    if not sweep:
        p.add_argument("--mode", choices=["base", "offline", "online"])
        p.add_argument("--grammar", choices=["none", "naive", "formal"])
        p.add_argument("--schema-filter", type=_on_off, metavar="on|off")
    p.add_argument("--keep-ratio", type=float)
    p.add_argument("--window", type=int)
    p.add_argument("--vote", choices=["majority", "confidence-weighted"])
    p.add_argument("--seed", type=int)
    p.add_argument("--schema-strict", type=_on_off, metavar="on|off")
    p.add_argument("--schema-label-mode", choices=["label-aware", "direction-only"])
    p.add_argument("--schema", type=Path, help="schema file overriding per-question schemas")
    _add_backend_flags(p)
    p.add_argument("--workers", type=int, default=1)


def _add_backend_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=["micro", "http", "none"], default="micro")
    p.add_argument("--graph", type=Path, help="graph fixture JSON (default: bundled movies graph)")
    p.add_argument("--http-url", help="endpoint URL (else $CYPHERFUNNEL_HTTP_URL)")
    p.add_argument("--http-timeout", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cypherfunnel", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="filter, vote and evaluate a dataset")
    run.add_argument("--dataset", type=Path, required=True)
    run.add_argument("--out", type=Path, help="report path (default: stdout)")
    _add_pipeline_flags(run)

    val = sub.add_parser("validate", help="grammar-check queries, one per line")
    val.add_argument("files", nargs="*", type=Path, help="query files (default: stdin)")
    val.add_argument("--grammar", choices=["naive", "formal", "both"], default="formal")

    syn = sub.add_parser("synth", help="generate a synthetic dataset")
    syn.add_argument("--seed", type=int, default=42)
    syn.add_argument("--n-questions", type=int, default=50)
    syn.add_argument("--n-traces", type=int, default=16)
    syn.add_argument("--p-syntax-error", type=float, default=0.4)
    syn.add_argument("--p-direction-error", type=float, default=0.3)
    syn.add_argument("--p-label-error", type=float, default=0.0)
    syn.add_argument("--confidence-gap", type=float, default=1.0)
    syn.add_argument("--gold-pool", type=Path, help="JSON list of {question, gold_query}")
    syn.add_argument("--graph", type=Path)
    syn.add_argument("--schema", type=Path)
    syn.add_argument("--out", type=Path, help="dataset path (default: stdout)")

    ev = sub.add_parser("eval", help="score a predictions file")
    ev.add_argument("--predictions", type=Path, required=True,
                    help="JSONL of {question_id, prediction}; null prediction = empty")
    ev.add_argument("--gold", type=Path, required=True,
                    help="dataset JSONL, or JSONL of {question_id, gold_query}")
    ev.add_argument("--out", type=Path)
    _add_backend_flags(ev)

    sw = sub.add_parser("sweep", help="run a grid of configurations, emit CSV")
    sw.add_argument("--dataset", type=Path, required=True)
    sw.add_argument("--modes", default="base,offline,online")
    sw.add_argument("--grammars", default="none,naive,formal")
    sw.add_argument("--schema-filters", default="off,on")
    sw.add_argument("--out", type=Path, help="CSV path (default: stdout)")
    _add_pipeline_flags(sw, sweep=True)
    return parser


def _write(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _backend(args: argparse.Namespace):
    if args.backend == "none":
        return None
    if args.backend == "http":
        overrides: dict[str, Any] = {}
        if args.http_url:
            overrides["url"] = args.http_url
        if args.http_timeout:
            overrides["timeout"] = args.http_timeout
        try:
            return HttpBackend(HttpConfig.from_env(**overrides))
        except ValueError as exc:
            raise UsageError(f"http backend: {exc}") from exc
    graph = MicroGraph.load(args.graph) if args.graph else default_graph()
    return MicroEngine(graph)


def _pipeline_config(args: argparse.Namespace, **fixed: Any) -> PipelineConfig:
    values: dict[str, Any] = {}
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DatasetError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError("config file must hold a flat JSON object")
        for key, value in data.items():
            norm = key.replace("-", "_")
            if norm not in _CONFIG_KEYS:
                raise UsageError(f"unknown config key {key!r}")
            if norm in ("schema_filter", "schema_strict") and isinstance(value, str):
                value = _on_off(value)
            values[_CONFIG_KEYS[norm]] = value
    for flag, field_name in _CONFIG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[field_name] = value
    values.update(fixed)
    try:
        return PipelineConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc


def _global_schema(args: argparse.Namespace):
    if args.schema is None:
        return None
    try:
        text = args.schema.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read schema {args.schema}: {exc}") from exc
    return parse_schema(text)


def cmd_run(args: argparse.Namespace) -> int:
    config = _pipeline_config(args)
    records = load_dataset(args.dataset)
    report = run_pipeline(records, config, _backend(args), _global_schema(args), args.workers)
    _write(report.to_json(), args.out)
    ev = report.evaluation
    log.info("%s: %d questions, %s", config.label, ev.total, ev.table_row())
    return EXIT_OK


def _read_queries(files: Sequence[Path]) -> list[tuple[str, str]]:
    out = []
    if not files:
        return [("<stdin>", line.rstrip("\n")) for line in sys.stdin if line.strip()]
    for path in files:
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise DatasetError(f"cannot read {path}: {exc}") from exc
        out.extend((str(path), line) for line in lines if line.strip())
    return out


def cmd_validate(args: argparse.Namespace) -> int:
    variants = ["naive", "formal"] if args.grammar == "both" else [args.grammar]
    for source, query in _read_queries(args.files):
        for variant in variants:
            verdict = grammar_validate(query, variant)
            if verdict.accepted:
                print(f"ACCEPT\t{variant}\t{query}")
            else:
                d = verdict.diagnostics[0]
                print(f"REJECT\t{variant}\t{d.offset}:{d.line}:{d.column}: {d.message}\t{query}")
    return EXIT_OK


def _load_gold_pool(path: Path) -> list[GoldItem]:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        return [GoldItem(d["question"], d["gold_query"]) for d in data]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DatasetError(f"bad gold pool {path}: {exc}") from exc


def cmd_synth(args: argparse.Namespace) -> int:
    try:
        config = SynthConfig(
            n_questions=args.n_questions, n_traces=args.n_traces,
            p_syntax_error=args.p_syntax_error, p_direction_error=args.p_direction_error,
            p_label_error=args.p_label_error, confidence_gap=args.confidence_gap, seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    golds = _load_gold_pool(args.gold_pool) if args.gold_pool else default_gold_pool()
    graph = MicroGraph.load(args.graph) if args.graph else default_graph()
    schema_text = args.schema.read_text(encoding="utf-8") if args.schema else None
    _write(dumps_dataset(generate(golds, graph, config, schema_text)), args.out)
    return EXIT_OK


def _read_jsonl(path: Path) -> list[dict]:
    rows = []
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}: line {lineno}: invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict) or "question_id" not in obj:
            raise DatasetError(f"{path}: line {lineno}: missing required field 'question_id'")
        rows.append(obj)
    return rows


def cmd_eval(args: argparse.Namespace) -> int:
    backend = _backend(args)
    if backend is None:
        raise UsageError("eval needs an execution backend")
    golds = {}
    for obj in _read_jsonl(args.gold):
        if "gold_query" not in obj:
            raise DatasetError(f"{args.gold}: {obj['question_id']}: missing required field 'gold_query'")
        golds[str(obj["question_id"])] = obj["gold_query"]
    rows, excluded = [], []
    for obj in _read_jsonl(args.predictions):
        qid = str(obj["question_id"])
        if qid not in golds:
            raise DatasetError(f"{args.predictions}: no gold query for {qid}")
        pred = obj.get("prediction")
        prediction = EMPTY if pred is None else Prediction(str(pred), 1)
        try:
            rows.append(evaluate_question(qid, prediction, golds[qid], backend))
        except GoldQueryError as exc:
            excluded.append({"question_id": qid, "reason": str(exc)})
    report = aggregate(rows, excluded)
    _write(json.dumps(report.as_dict(), sort_keys=True, indent=2) + "\n", args.out)
    return EXIT_OK


def _csv_list(value: str, allowed: Sequence[str], what: str) -> list[str]:
    items = [v.strip() for v in value.split(",") if v.strip()]
    bad = [v for v in items if v not in allowed]
    if bad or not items:
        raise UsageError(f"--{what}: expected comma list from {', '.join(allowed)}")
    return items


def cmd_sweep(args: argparse.Namespace) -> int:
    modes = _csv_list(args.modes, ["base", "offline", "online"], "modes")
    grammars = _csv_list(args.grammars, ["none", "naive", "formal"], "grammars")
    filters = [_on_off(v) for v in _csv_list(args.schema_filters, ["off", "on"], "schema-filters")]
    records = load_dataset(args.dataset)
    backend = _backend(args)
    schema = _global_schema(args)
    reports = []
    for mode, grammar, schema_on in itertools.product(modes, grammars, filters):
        config = _pipeline_config(args, inference_mode=mode, grammar_variant=grammar,
                                  schema_filter=schema_on)
        report = run_pipeline(records, config, backend, schema, args.workers)
        reports.append(report.evaluation)
        log.info("%s done", config.label)
    csv_text = reports_to_csv(reports, ["inference_mode", "grammar_variant", "schema_filter"])
    _write(csv_text, args.out)
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "validate": cmd_validate,
    "synth": cmd_synth,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, SchemaError, ConfigError, GraphFixtureError, SynthError, OSError) as exc:
        print(f"cypherfunnel: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
