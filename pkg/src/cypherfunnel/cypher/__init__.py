"""Cypher tokenizer, naive validator, subset parser and the grammar filter stage."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..traces import FunnelRecord
from . import ast
from .lexer import KEYWORDS, CypherToken, LexError, tokenize, unquote
from .naive import brackets_balanced, naive_validate
from .parser import (
    CypherSyntaxError,
    Diagnostic,
    SyntaxVerdict,
    formal_validate,
    parse,
)

__all__ = [
    "KEYWORDS", "CypherToken", "LexError", "tokenize", "unquote", "ast",
    "brackets_balanced", "naive_validate", "CypherSyntaxError", "Diagnostic",
    "SyntaxVerdict", "formal_validate", "parse", "validate", "grammar_filter",
    "GrammarOutcome",
]


def validate(text: str | bytes, variant: str) -> SyntaxVerdict:
    if variant == "naive":
        return naive_validate(text)
    if variant == "formal":
        return formal_validate(text)
    if variant == "none":
        return SyntaxVerdict.ok()
    raise ValueError(f"unknown grammar variant {variant!r}")


@dataclass
class GrammarOutcome:
    survivors: list[int]
    records: list[FunnelRecord]
    verdicts: list[SyntaxVerdict]


def grammar_filter(candidates: Sequence[tuple[str, str]], variant: str) -> GrammarOutcome:
    """Drop candidates failing the chosen validator.

    ``candidates`` are (trace_id, post-processed text) pairs; survivors are
    reported as indices into that sequence.
    """
    survivors: list[int] = []
    records: list[FunnelRecord] = []
    verdicts: list[SyntaxVerdict] = []
    for i, (trace_id, text) in enumerate(candidates):
        verdict = validate(text, variant)
        verdicts.append(verdict)
        if verdict.accepted:
            survivors.append(i)
        else:
            records.append(FunnelRecord(trace_id, "grammar", f"{variant}: {verdict.message}"))
    return GrammarOutcome(survivors, records, verdicts)
