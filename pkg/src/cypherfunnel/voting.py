"""Vote keys and deterministic voting over surviving candidates."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .cypher import LexError, tokenize


def vote_key(text: str) -> str:
    """Uppercase keywords, keep everything else byte-exact, single-space gaps."""
    try:
        tokens = tokenize(text)
    except LexError:
        return " ".join(text.split())
    parts: list[str] = []
    prev_end = None
    for tok in tokens:
        if prev_end is not None and tok.offset > prev_end:
            parts.append(" ")
        parts.append(tok.text.upper() if tok.kind == "keyword" else tok.text)
        prev_end = tok.end
    return "".join(parts)


@dataclass(frozen=True)
class Candidate:
    trace_id: str
    text: str
    mean_confidence: float
    key: str = ""

    def __post_init__(self) -> None:
        if not self.key:
            object.__setattr__(self, "key", vote_key(self.text))


@dataclass(frozen=True)
class Prediction:
    query: Optional[str]  # None marks an EMPTY prediction
    support_count: int = 0
    total_confidence: float = 0.0
    contributors: tuple[str, ...] = field(default=())
    key: Optional[str] = None

    @property
    def is_empty(self) -> bool:
        return self.query is None

    def as_dict(self) -> dict:
        return {
            "query": self.query,
            "empty": self.is_empty,
            "support_count": self.support_count,
            "total_confidence": self.total_confidence,
            "contributors": list(self.contributors),
        }


EMPTY = Prediction(None)


def vote(candidates: Sequence[Candidate], mode: str = "majority") -> Prediction:
    """Pick the winning vote key.

    Score is the count (majority) or summed mean confidence (weighted).
    Ties go to the higher summed confidence, then the smaller key.
    """
    if mode not in ("majority", "confidence-weighted"):
        raise ValueError(f"unknown vote mode {mode!r}")
    if not candidates:
        return EMPTY
    groups: dict[str, list[Candidate]] = defaultdict(list)
    for c in candidates:
        groups[c.key].append(c)

    def rank(key: str):
        members = groups[key]
        total = math.fsum(c.mean_confidence for c in members)
        score = len(members) if mode == "majority" else total
        return (-score, -total, key)

    winner = min(groups, key=rank)
    members = groups[winner]
    best = min(members, key=lambda c: (-c.mean_confidence, c.text, c.trace_id))
    return Prediction(
        query=best.text,
        support_count=len(members),
        total_confidence=math.fsum(c.mean_confidence for c in members),
        contributors=tuple(sorted(c.trace_id for c in members)),
        key=winner,
    )
