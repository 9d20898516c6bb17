"""Per-question funnel: post-process, confidence, grammar, schema, vote, evaluate."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

from .confidence import (
    TraceConfidence,
    calibrate_threshold,
    offline_filter,
    online_simulate,
    trace_confidence,
)
from .cypher import CypherSyntaxError, grammar_filter, parse
from .evaluation import Backend, EvalReport, EvalRow, GoldQueryError, aggregate, evaluate_question
from .schema import GraphSchema, SchemaError, parse_schema, schema_filter
from .traces import FunnelRecord, PipelineConfig, QuestionRecord, postprocess_raw
from .voting import Candidate, Prediction, vote

REPORT_VERSION = 1
STAGE_NAMES = ("input", "confidence", "grammar", "schema")


class ConfigError(ValueError):
    pass


@dataclass
class QuestionResult:
    question_id: str
    stage_counts: dict[str, int]
    funnel: list[FunnelRecord]
    prediction: Prediction
    tokens_saved: int = 0
    threshold: Optional[float] = None
    row: Optional[EvalRow] = None
    gold_error: Optional[str] = None

    def as_dict(self) -> dict[str, Any]:
        return {
            "question_id": self.question_id,
            "stage_counts": self.stage_counts,
            "tokens_saved": self.tokens_saved,
            "threshold": self.threshold,
            "prediction": self.prediction.as_dict(),
            "evaluation": self.row.as_dict() if self.row is not None else None,
            "gold_error": self.gold_error,
            "funnel": [r.as_dict() for r in self.funnel],
        }


@dataclass
class RunReport:
    config: dict[str, Any]
    evaluation: EvalReport
    questions: list[QuestionResult] = field(default_factory=list)

    @property
    def tokens_saved(self) -> int:
        return sum(q.tokens_saved for q in self.questions)

    def stage_totals(self) -> dict[str, int]:
        return {s: sum(q.stage_counts[s] for q in self.questions) for s in STAGE_NAMES}

    def as_dict(self) -> dict[str, Any]:
        return {
            "report_version": REPORT_VERSION,
            "config": self.config,
            "evaluation": self.evaluation.as_dict(),
            "stage_totals": self.stage_totals(),
            "tokens_saved": self.tokens_saved,
            "questions": [q.as_dict() for q in self.questions],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def check_config(records: Sequence[QuestionRecord], config: PipelineConfig,
                 schema: Optional[GraphSchema]) -> None:
    if config.inference_mode == "online":
        short = [r.question_id for r in records if len(r.traces) < 2]
        if short:
            raise ConfigError(f"online mode needs at least 2 traces per question; "
                              f"{len(short)} question(s) have fewer, e.g. {short[0]}")
    if config.schema_filter and schema is None:
        for r in records:
            try:
                parse_schema(r.schema_text)
            except SchemaError as exc:
                raise ConfigError(f"schema filter enabled but {r.question_id}: {exc}") from exc


def _confidence_stage(ids: list[str], confs: list[TraceConfidence], n_tokens: list[int],
                      config: PipelineConfig, funnel: dict[str, FunnelRecord]
                      ) -> tuple[list[int], int, Optional[float]]:
    n = len(ids)
    if config.inference_mode == "base":
        return list(range(n)), 0, None
    scores = [c.lowest_group for c in confs]
    if config.inference_mode == "offline":
        kept = offline_filter(ids, scores, config.keep_ratio)
        kept_set = set(kept)
        for i in range(n):
            if i not in kept_set:
                funnel[ids[i]].removed_at = "confidence"
                funnel[ids[i]].reason = f"lowest group confidence {scores[i]:.6g} outside top {config.keep_ratio:g}"
        return kept, 0, None

    warmup = max(1, math.ceil(round(config.warmup_fraction * n, 9)))
    threshold = calibrate_threshold(scores[:warmup], config.keep_ratio)
    kept = list(range(warmup))
    saved = 0
    for i in range(warmup, n):
        if n_tokens[i] == 0:
            funnel[ids[i]].removed_at = "confidence"
            funnel[ids[i]].reason = "empty generation"
            continue
        result = online_simulate(confs[i].token_confidences, config.window, threshold)
        if result.kept:
            kept.append(i)
        else:
            saved += result.tokens_saved
            funnel[ids[i]].removed_at = "confidence"
            funnel[ids[i]].reason = (f"terminated at token {result.terminated_at} "
                                     f"(threshold {threshold:.6g})")
    return kept, saved, threshold


def process_question(record: QuestionRecord, config: PipelineConfig,
                     schema: Optional[GraphSchema] = None) -> QuestionResult:
    """Run the filtering funnel and voting for one question (no evaluation)."""
    ids = [t.trace_id for t in record.traces]
    texts = [postprocess_raw(t.raw_text) for t in record.traces]
    confs = [trace_confidence(t, config.window) for t in record.traces]
    n_tokens = [len(t.tokens) for t in record.traces]
    funnel = {tid: FunnelRecord(tid, stats=c.snapshot()) for tid, c in zip(ids, confs)}
    counts = {"input": len(ids)}

    alive, saved, threshold = _confidence_stage(ids, confs, n_tokens, config, funnel)
    counts["confidence"] = len(alive)

    asts: list = [None] * len(ids)
    if config.grammar_variant != "none":
        outcome = grammar_filter([(ids[i], texts[i]) for i in alive], config.grammar_variant)
        for rec in outcome.records:
            funnel[rec.trace_id].removed_at = rec.removed_at
            funnel[rec.trace_id].reason = rec.reason
        alive = [alive[k] for k in outcome.survivors]
    counts["grammar"] = len(alive)

    if config.schema_filter:
        if schema is None:
            try:
                schema = parse_schema(record.schema_text)
            except SchemaError as exc:
                raise ConfigError(f"{record.question_id}: {exc}") from exc
        if config.grammar_variant == "formal":
            for i in alive:
                try:
                    asts[i] = parse(texts[i])
                except CypherSyntaxError:
                    pass
        outcome = schema_filter(
            [(ids[i], texts[i]) for i in alive], schema,
            asts=[asts[i] for i in alive],
            strict=config.schema_strict,
            label_mode=config.schema_label_mode,
            scan_only=config.grammar_variant == "naive",
        )
        for rec in outcome.records:
            funnel[rec.trace_id].removed_at = rec.removed_at
            funnel[rec.trace_id].reason = rec.reason
        alive = [alive[k] for k in outcome.survivors]
    counts["schema"] = len(alive)

    prediction = vote(
        [Candidate(ids[i], texts[i], confs[i].mean_confidence) for i in alive],
        config.vote_mode,
    )
    return QuestionResult(record.question_id, counts, [funnel[t] for t in ids],
                          prediction, saved, threshold)


def run_pipeline(records: Sequence[QuestionRecord], config: PipelineConfig,
                 backend: Optional[Backend] = None, schema: Optional[GraphSchema] = None,
                 workers: int = 1) -> RunReport:
    """Funnel every question, vote, and (given a backend) evaluate.

    Results are merged by question index, so ``workers`` never changes output.
    """
    check_config(records, config, schema)

    def work(record: QuestionRecord) -> QuestionResult:
        result = process_question(record, config, schema)
        if backend is not None:
            try:
                result.row = evaluate_question(record.question_id, result.prediction,
                                               record.gold_query, backend)
            except GoldQueryError as exc:
                result.gold_error = str(exc)
        return result

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, records))
    else:
        results = [work(r) for r in records]

    rows = [r.row for r in results if r.row is not None]
    excluded = [{"question_id": r.question_id, "reason": r.gold_error}
                for r in results if r.gold_error is not None]
    evaluation = aggregate(rows, excluded, config.as_dict())
    return RunReport(config.as_dict(), evaluation, results)
