"""ROUGE-L scoring, execution-based evaluation and the outcome taxonomy."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Any, Optional, Protocol, Sequence

from .executor import RUNTIME_ERROR, SUCCESS, SYNTAX_ERROR, ExecutionOutcome
from .voting import Prediction

EMPTY = "empty"
OUTCOME_CLASSES = (SUCCESS, RUNTIME_ERROR, SYNTAX_ERROR, EMPTY)

TABLE_COLUMNS = (
    "ROUGE-L (Lexical)",
    "ROUGE-L (Exec.)",
    "Exec. Succ. Ratio (%)",
    "Succ.(%)",
    "Run.Err",
    "Syn.Err",
    "Empty",
)

_WORD = re.compile(r"[^\W_]+")


class Backend(Protocol):
    def execute(self, query: str) -> ExecutionOutcome: ...


class GoldQueryError(RuntimeError):
    def __init__(self, question_id: str, outcome: ExecutionOutcome):
        super().__init__(f"gold query for {question_id} failed: {outcome.status}: {outcome.message}")
        self.question_id = question_id
        self.outcome = outcome


def rouge_tokenize(text: str) -> list[str]:
    """Lowercase, then split on every non-alphanumeric character."""
    return _WORD.findall(text.lower())


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(pred_tokens: Sequence[str], ref_tokens: Sequence[str]) -> float:
    """LCS-based F1 between two token sequences."""
    if not pred_tokens or not ref_tokens:
        return 0.0
    lcs = lcs_length(pred_tokens, ref_tokens)
    if lcs == 0:
        return 0.0
    recall = lcs / len(ref_tokens)
    precision = lcs / len(pred_tokens)
    return 2 * recall * precision / (recall + precision)


def serialize_rows(rows: Sequence[Sequence[Any]]) -> str:
    lines = sorted(json.dumps(list(r), sort_keys=True, ensure_ascii=False) for r in rows)
    return " ".join(lines)


@dataclass
class EvalRow:
    question_id: str
    rouge_l_lexical: float
    rouge_l_exec: Optional[float]
    outcome_class: str
    prediction: Optional[str] = None
    message: str = ""

    def as_dict(self) -> dict[str, Any]:
        return {
            "question_id": self.question_id,
            "rouge_l_lexical": self.rouge_l_lexical,
            "rouge_l_exec": self.rouge_l_exec,
            "outcome_class": self.outcome_class,
            "prediction": self.prediction,
            "message": self.message,
        }


def evaluate_question(question_id: str, prediction: Prediction, gold: str, backend: Backend,
                      gold_outcome: Optional[ExecutionOutcome] = None) -> EvalRow:
    gold_outcome = gold_outcome or backend.execute(gold)
    if not gold_outcome.ok:
        raise GoldQueryError(question_id, gold_outcome)
    if prediction.is_empty:
        return EvalRow(question_id, 0.0, None, EMPTY, None, "all candidates filtered")
    lexical = rouge_l(rouge_tokenize(prediction.query), rouge_tokenize(gold))
    outcome = backend.execute(prediction.query)
    if not outcome.ok:
        return EvalRow(question_id, lexical, None, outcome.status, prediction.query, outcome.message)
    exec_score = rouge_l(
        rouge_tokenize(serialize_rows(outcome.rows)),
        rouge_tokenize(serialize_rows(gold_outcome.rows)),
    )
    return EvalRow(question_id, lexical, exec_score, SUCCESS, prediction.query)


def _half_up(value: float, places: int = 1) -> float:
    quantum = Decimal(1).scaleb(-places)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


@dataclass
class EvalReport:
    rows: list[EvalRow]
    counts: dict[str, int]
    mean_rouge_l_lexical: float
    mean_rouge_l_exec: float
    exec_success_ratio: float
    empty_dataset: bool = False
    excluded: list[dict[str, str]] = field(default_factory=list)
    config: dict[str, Any] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return len(self.rows)

    @property
    def exec_success_display(self) -> float:
        return _half_up(self.exec_success_ratio, 1)

    def table_row(self) -> dict[str, Any]:
        return {
            "ROUGE-L (Lexical)": f"{self.mean_rouge_l_lexical:.4f}",
            "ROUGE-L (Exec.)": f"{self.mean_rouge_l_exec:.4f}",
            "Exec. Succ. Ratio (%)": f"{self.exec_success_display:.1f}",
            "Succ.(%)": f"{self.exec_success_display:.1f}",
            "Run.Err": self.counts[RUNTIME_ERROR],
            "Syn.Err": self.counts[SYNTAX_ERROR],
            "Empty": self.counts[EMPTY],
        }

    def as_dict(self) -> dict[str, Any]:
        return {
            "config": self.config,
            "aggregates": {
                "questions": self.total,
                "mean_rouge_l_lexical": self.mean_rouge_l_lexical,
                "mean_rouge_l_exec": self.mean_rouge_l_exec,
                "exec_success_ratio": self.exec_success_ratio,
                "exec_success_ratio_display": self.exec_success_display,
                "counts": dict(self.counts),
                "empty_dataset": self.empty_dataset,
            },
            "excluded": self.excluded,
            "rows": [r.as_dict() for r in self.rows],
        }


def aggregate(rows: Sequence[EvalRow], excluded: Sequence[dict[str, str]] = (),
              config: Optional[dict[str, Any]] = None) -> EvalReport:
    counts = {c: 0 for c in OUTCOME_CLASSES}
    for row in rows:
        if row.outcome_class not in counts:
            raise ValueError(f"unknown outcome class {row.outcome_class!r}")
        counts[row.outcome_class] += 1
    ordered = sorted(rows, key=lambda r: r.question_id)
    total = len(ordered)
    if total == 0:
        return EvalReport([], counts, 0.0, 0.0, 0.0, True, list(excluded), dict(config or {}))
    lexical = math.fsum(r.rouge_l_lexical for r in ordered) / total
    # empties count as 0; runtime and syntax errors have no execution score
    exec_scores = [
        r.rouge_l_exec if r.outcome_class == SUCCESS else 0.0
        for r in ordered
        if r.outcome_class in (SUCCESS, EMPTY)
    ]
    exec_mean = math.fsum(exec_scores) / len(exec_scores) if exec_scores else 0.0
    ratio = 100.0 * counts[SUCCESS] / total
    return EvalReport(ordered, counts, lexical, exec_mean, ratio, False,
                      list(excluded), dict(config or {}))


def reports_to_csv(reports: Sequence[EvalReport], config_columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([*config_columns, *TABLE_COLUMNS])
    for report in reports:
        row = report.table_row()
        writer.writerow([*(report.config.get(c, "") for c in config_columns),
                         *(row[c] for c in TABLE_COLUMNS)])
    return buf.getvalue()
