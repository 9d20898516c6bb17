"""Token, group and trace confidence plus offline/online filtering."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, TypeVar

from .traces import CandidateTrace, TokenStep

T = TypeVar("T")


@dataclass(frozen=True)
class TraceConfidence:
    token_confidences: tuple[float, ...]
    group_confidences: tuple[float, ...]
    lowest_group: float
    mean_confidence: float

    def snapshot(self) -> dict[str, float]:
        return {
            "lowest_group": self.lowest_group,
            "mean_confidence": self.mean_confidence,
            "n_tokens": len(self.token_confidences),
        }


@dataclass(frozen=True)
class OnlineResult:
    kept: bool
    terminated_at: int | None = None
    tokens_consumed: int = 0
    tokens_total: int = 0

    @property
    def tokens_saved(self) -> int:
        return self.tokens_total - self.tokens_consumed


def _count_for_fraction(fraction: float, n: int) -> int:
    # rounding first keeps e.g. 0.7 * 10 from ceiling to 8
    return math.ceil(round(fraction * n, 9))


def token_confidence(step: TokenStep | Sequence[float]) -> float:
    """Negated mean of the recorded top-k log-probabilities."""
    values = step.topk_logprobs if isinstance(step, TokenStep) else tuple(step)
    if not values:
        raise ValueError("token confidence needs at least one log-probability")
    return -math.fsum(values) / len(values)


def group_confidences(token_confs: Sequence[float], w: int) -> list[float]:
    if w < 1:
        raise ValueError("window must be a positive integer")
    n = len(token_confs)
    if n == 0:
        raise ValueError("group confidences need at least one token confidence")
    if n <= w:
        return [math.fsum(token_confs) / n]
    return [math.fsum(token_confs[i : i + w]) / w for i in range(n - w + 1)]


def trace_confidence(trace: CandidateTrace, w: int) -> TraceConfidence:
    confs = tuple(token_confidence(s) for s in trace.tokens)
    if not confs:
        # generation failure: nothing to score, ranks below any real trace
        return TraceConfidence((), (), 0.0, 0.0)
    groups = tuple(group_confidences(confs, w))
    return TraceConfidence(confs, groups, min(groups), math.fsum(confs) / len(confs))


def offline_filter(items: Sequence[T], scores: Sequence[float], keep_ratio: float) -> list[int]:
    """Indices of the ceil(keep_ratio * N) best-scoring items, in input order.

    Ties on score keep the earlier index.
    """
    if not 0.0 < keep_ratio <= 1.0:
        raise ValueError("keep_ratio must lie in (0, 1]")
    if len(items) != len(scores):
        raise ValueError("items and scores differ in length")
    n = len(items)
    if n == 0:
        return []
    keep = _count_for_fraction(keep_ratio, n)
    ranked = sorted(range(n), key=lambda i: (-scores[i], i))
    return sorted(ranked[:keep])


def calibrate_threshold(warmup_scores: Sequence[float], keep_ratio: float) -> float:
    """Nearest-rank (1 - keep_ratio) quantile of the warmup scores."""
    if not warmup_scores:
        raise ValueError("calibration needs at least one warmup score")
    if not 0.0 < keep_ratio <= 1.0:
        raise ValueError("keep_ratio must lie in (0, 1]")
    ordered = sorted(warmup_scores)
    rank = max(1, _count_for_fraction(1.0 - keep_ratio, len(ordered)))
    return ordered[rank - 1]


def online_simulate(token_confs: Sequence[float], w: int, threshold: float) -> OnlineResult:
    """Replay a recorded trace and stop at the first window below threshold.

    ``terminated_at`` is the index of the token that completed the failing
    window.
    """
    n = len(token_confs)
    if n == 0:
        raise ValueError("online simulation needs at least one token")
    for g, mean in enumerate(group_confidences(token_confs, w)):
        if mean < threshold:
            pos = min(g + w, n) - 1
            return OnlineResult(False, pos, pos + 1, n)
    return OnlineResult(True, None, n, n)
