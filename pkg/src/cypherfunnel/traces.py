"""Core record types, dataset JSONL I/O and raw-output post-processing."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence, Union


class DatasetError(ValueError):
    """Raised when a dataset file cannot be read or is malformed."""


@dataclass(frozen=True)
class TokenStep:
    """Top-k natural-log probabilities recorded at one decoding position."""

    topk_logprobs: tuple[float, ...]

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.topk_logprobs)
        object.__setattr__(self, "topk_logprobs", values)
        if not values:
            raise ValueError("topk_logprobs must be non-empty")
        for v in values:
            if not math.isfinite(v):
                raise ValueError(f"non-finite log-probability {v!r}")
            if v > 0.0:
                raise ValueError(f"log-probability must be <= 0, got {v!r}")
        if any(a < b for a, b in zip(values, values[1:])):
            raise ValueError("topk_logprobs must be sorted in non-increasing order")


@dataclass(frozen=True)
class CandidateTrace:
    trace_id: str
    raw_text: str
    tokens: tuple[TokenStep, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens and self.raw_text:
            raise ValueError(f"trace {self.trace_id!r} has text but no tokens")


@dataclass(frozen=True)
class QuestionRecord:
    question_id: str
    question: str
    gold_query: str
    schema_text: str
    traces: tuple[CandidateTrace, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "traces", tuple(self.traces))


@dataclass(frozen=True)
class SamplingProfile:
    """Sampling settings; recorded for provenance, never used in computation."""

    name: str
    temperature: float | None = None
    top_p: float | None = None
    top_k: int | None = None

    PRESETS = {
        "moderately-diverse": (0.9, 0.99, 60),
        "very-diverse": (1.2, 0.999, 80),
    }

    def __post_init__(self) -> None:
        if self.name in self.PRESETS:
            expected = self.PRESETS[self.name]
            given = (self.temperature, self.top_p, self.top_k)
            if given == (None, None, None):
                t, p, k = expected
                object.__setattr__(self, "temperature", t)
                object.__setattr__(self, "top_p", p)
                object.__setattr__(self, "top_k", k)
            elif given != expected:
                raise ValueError(f"profile {self.name!r} must use {expected}, got {given}")
        elif self.name != "custom":
            raise ValueError(f"unknown sampling profile {self.name!r}")

    @classmethod
    def named(cls, name: str) -> "SamplingProfile":
        return cls(name)


INFERENCE_MODES = ("base", "offline", "online")
GRAMMAR_VARIANTS = ("none", "naive", "formal")
VOTE_MODES = ("majority", "confidence-weighted")
SCHEMA_LABEL_MODES = ("label-aware", "direction-only")


@dataclass(frozen=True)
class PipelineConfig:
    inference_mode: str = "base"
    grammar_variant: str = "none"
    schema_filter: bool = False
    keep_ratio: float = 0.9
    window: int = 32
    vote_mode: str = "majority"
    seed: int = 0
    schema_strict: bool = False
    schema_label_mode: str = "label-aware"
    warmup_fraction: float = 0.1

    def __post_init__(self) -> None:
        if self.inference_mode not in INFERENCE_MODES:
            raise ValueError(f"inference_mode must be one of {INFERENCE_MODES}")
        if self.grammar_variant not in GRAMMAR_VARIANTS:
            raise ValueError(f"grammar_variant must be one of {GRAMMAR_VARIANTS}")
        if self.vote_mode not in VOTE_MODES:
            raise ValueError(f"vote_mode must be one of {VOTE_MODES}")
        if self.schema_label_mode not in SCHEMA_LABEL_MODES:
            raise ValueError(f"schema_label_mode must be one of {SCHEMA_LABEL_MODES}")
        if not 0.0 < self.keep_ratio <= 1.0:
            raise ValueError("keep_ratio must lie in (0, 1]")
        if int(self.window) != self.window or self.window < 1:
            raise ValueError("window must be a positive integer")
        if not 0.0 < self.warmup_fraction <= 1.0:
            raise ValueError("warmup_fraction must lie in (0, 1]")

    def as_dict(self) -> dict[str, Any]:
        return {
            "inference_mode": self.inference_mode,
            "grammar_variant": self.grammar_variant,
            "schema_filter": self.schema_filter,
            "keep_ratio": self.keep_ratio,
            "window": self.window,
            "vote_mode": self.vote_mode,
            "seed": self.seed,
            "schema_strict": self.schema_strict,
            "schema_label_mode": self.schema_label_mode,
            "warmup_fraction": self.warmup_fraction,
        }

    @property
    def label(self) -> str:
        parts = [self.inference_mode]
        if self.grammar_variant != "none":
            parts.append(self.grammar_variant)
        if self.schema_filter:
            parts.append("schema")
        return "+".join(parts)


STAGES = ("confidence", "grammar", "schema", "survived")


@dataclass
class FunnelRecord:
    """Where one trace left the funnel, and why."""

    trace_id: str
    removed_at: str = "survived"
    reason: str = ""
    stats: dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        return {
            "trace_id": self.trace_id,
            "removed_at": self.removed_at,
            "reason": self.reason,
            "stats": self.stats,
        }


# -- post-processing ---------------------------------------------------------

_OPEN_FENCE = re.compile(r"\A```[A-Za-z0-9_+-]*[ \t]*(?:\r?\n|\Z)")
_CLOSE_FENCE = re.compile(r"(?:\r?\n)?[ \t]*```\Z")
_CYPHER_PREFIX = re.compile(r"\A(?:cypher[ \t]*:|cypher[ \t]*(?:\r?\n|\Z))", re.IGNORECASE)
_QUOTES = "'\"`"


def _collapse_whitespace(text: str) -> str:
    out: list[str] = []
    i, n = 0, len(text)
    quote = None
    line_comment = False
    while i < n:
        ch = text[i]
        if quote is not None:
            out.append(ch)
            if ch == "\\" and quote != "`" and i + 1 < n:
                out.append(text[i + 1])
                i += 2
                continue
            if ch == quote:
                quote = None
            i += 1
            continue
        if ch.isspace():
            j = i
            while j < n and text[j].isspace():
                j += 1
            # a newline terminating a // comment must survive the collapse
            if line_comment and "\n" in text[i:j]:
                out.append("\n")
                line_comment = False
            else:
                out.append(" ")
            i = j
            continue
        if line_comment:
            out.append(ch)
            i += 1
            continue
        if ch in _QUOTES:
            quote = ch
        elif ch == "/" and text.startswith("//", i):
            line_comment = True
        out.append(ch)
        i += 1
    return "".join(out)


def _postprocess_once(text: str) -> str:
    text = text.strip()
    text = _OPEN_FENCE.sub("", text, count=1)
    text = _CLOSE_FENCE.sub("", text, count=1).strip()
    text = _CYPHER_PREFIX.sub("", text, count=1).strip()
    text = text.rstrip().rstrip(";").rstrip()
    return _collapse_whitespace(text)


def postprocess_raw(raw_text: str) -> str:
    """Clean one raw model output into a bare query string.

    Strips surrounding whitespace, markdown fences, a leading ``cypher:``
    prefix and trailing semicolons, then collapses whitespace outside quoted
    regions. Runs to a fixed point, so the result is idempotent.
    """
    current = raw_text
    while True:
        cleaned = _postprocess_once(current)
        if cleaned == current:
            return cleaned
        current = cleaned


# -- JSONL I/O ---------------------------------------------------------------

_REQUIRED_RECORD = ("question_id", "question", "gold_query", "schema", "traces")


def _reject_constant(token: str) -> float:
    raise ValueError(f"non-finite number {token}")


def schema_field_to_text(value: Any) -> str:
    """Accept either schema text or a JSON list of {source, type, target}."""
    if isinstance(value, str):
        return value
    if isinstance(value, list):
        lines = []
        for item in value:
            if not isinstance(item, dict) or not {"source", "type", "target"} <= item.keys():
                raise ValueError("schema list entries need source, type and target")
            lines.append(f"(:{item['source']})-[:{item['type']}]->(:{item['target']})")
        return "\n".join(lines)
    raise ValueError("schema must be a string or a list of triples")


def _trace_from_json(obj: Any, where: str) -> CandidateTrace:
    if not isinstance(obj, dict):
        raise DatasetError(f"{where}: trace must be an object")
    for key in ("trace_id", "text", "tokens"):
        if key not in obj:
            raise DatasetError(f"{where}: trace missing required field '{key}'")
    try:
        steps = []
        for tok in obj["tokens"]:
            if not isinstance(tok, dict) or "topk_logprobs" not in tok:
                raise ValueError("token missing required field 'topk_logprobs'")
            steps.append(TokenStep(tuple(tok["topk_logprobs"])))
        return CandidateTrace(str(obj["trace_id"]), str(obj["text"]), tuple(steps))
    except (TypeError, ValueError) as exc:
        raise DatasetError(f"{where}: {exc}") from exc


def record_from_json(obj: Any, where: str = "record") -> QuestionRecord:
    if not isinstance(obj, dict):
        raise DatasetError(f"{where}: expected a JSON object")
    for key in _REQUIRED_RECORD:
        if key not in obj:
            raise DatasetError(f"{where}: missing required field '{key}'")
    if not isinstance(obj["traces"], list):
        raise DatasetError(f"{where}: 'traces' must be a list")
    try:
        schema_text = schema_field_to_text(obj["schema"])
    except ValueError as exc:
        raise DatasetError(f"{where}: {exc}") from exc
    traces = tuple(
        _trace_from_json(t, f"{where}, trace {i}") for i, t in enumerate(obj["traces"])
    )
    return QuestionRecord(
        question_id=str(obj["question_id"]),
        question=str(obj["question"]),
        gold_query=str(obj["gold_query"]),
        schema_text=schema_text,
        traces=traces,
    )


def record_to_json(record: QuestionRecord) -> dict[str, Any]:
    return {
        "question_id": record.question_id,
        "question": record.question,
        "gold_query": record.gold_query,
        "schema": record.schema_text,
        "traces": [
            {
                "trace_id": t.trace_id,
                "text": t.raw_text,
                "tokens": [{"topk_logprobs": list(s.topk_logprobs)} for s in t.tokens],
            }
            for t in record.traces
        ],
    }


def parse_dataset_lines(lines: Iterable[str], source: str = "<dataset>") -> list[QuestionRecord]:
    records: list[QuestionRecord] = []
    seen: set[str] = set()
    offset = 0
    for lineno, line in enumerate(lines, start=1):
        line_offset = offset
        offset += len(line.encode("utf-8"))
        if not line.strip():
            continue
        try:
            obj = json.loads(line, parse_constant=_reject_constant)
        except json.JSONDecodeError as exc:
            raise DatasetError(
                f"{source}: line {lineno}: invalid JSON at byte offset "
                f"{line_offset + len(line[: exc.pos].encode('utf-8'))}: {exc.msg}"
            ) from exc
        except ValueError as exc:
            raise DatasetError(f"{source}: line {lineno}: {exc}") from exc
        record = record_from_json(obj, f"{source}: line {lineno}")
        if record.question_id in seen:
            raise DatasetError(
                f"{source}: line {lineno}: duplicate question_id {record.question_id!r}"
            )
        seen.add(record.question_id)
        records.append(record)
    return records


def load_dataset(path: Union[str, Path]) -> list[QuestionRecord]:
    """Read a JSONL dataset; one QuestionRecord per non-blank line."""
    path = Path(path)
    try:
        with path.open(encoding="utf-8", newline="") as fh:
            return parse_dataset_lines(fh, str(path))
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise DatasetError(f"{path}: not valid UTF-8: {exc}") from exc


def dumps_dataset(records: Sequence[QuestionRecord]) -> str:
    return "".join(
        json.dumps(record_to_json(r), ensure_ascii=False, allow_nan=False) + "\n"
        for r in records
    )


def save_dataset(records: Sequence[QuestionRecord], path: Union[str, Path]) -> None:
    Path(path).write_text(dumps_dataset(records), encoding="utf-8")
