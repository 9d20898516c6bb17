"""Seeded synthetic candidate sets built by corrupting gold queries.

Sub-seeds: question ``i`` draws from ``random.Random(splitmix64(seed + (i + 1) * GOLDEN))``
so every question is reproducible on its own, whatever order workers run in.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Optional, Sequence

from .cypher import CypherSyntaxError, LexError, formal_validate, parse, tokenize
from .cypher.naive import CLAUSE_KEYWORDS
from .executor import MicroGraph, execute_micro
from .schema import GraphSchema, extract_usages, parse_schema, schema_validate
from .traces import CandidateTrace, QuestionRecord, TokenStep

MUTATION_KINDS = (
    "drop_bracket",
    "duplicate_clause_keyword",
    "truncate_tail",
    "flip_direction",
    "label_swap",
    "identity",
)
SYNTAX_KINDS = ("drop_bracket", "duplicate_clause_keyword", "truncate_tail")

GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1


class SynthError(ValueError):
    pass


def splitmix64(x: int) -> int:
    z = (x + GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def question_seed(seed: int, index: int) -> int:
    return splitmix64((seed + (index + 1) * GOLDEN) & _MASK)


# -- mutations ---------------------------------------------------------------

def _drop_bracket(gold: str, rng: random.Random) -> Optional[str]:
    brackets = [t for t in tokenize(gold) if t.kind == "symbol" and t.text in "()[]{}"]
    if not brackets:
        return None
    tok = rng.choice(brackets)
    return gold[: tok.offset] + gold[tok.end :]


def _duplicate_keyword(gold: str, rng: random.Random) -> Optional[str]:
    words = [t for t in tokenize(gold) if t.kind == "keyword" and t.upper in CLAUSE_KEYWORDS]
    if not words:
        return None
    tok = rng.choice(words)
    return gold[: tok.end] + " " + tok.text + gold[tok.end :]


@lru_cache(maxsize=1024)
def _truncations(gold: str) -> tuple[str, ...]:
    """Token-boundary prefixes of ``gold`` that the formal parser rejects."""
    tokens = tokenize(gold)
    cuts = tuple(
        gold[: tokens[k - 1].end]
        for k in range(1, len(tokens))
        if not formal_validate(gold[: tokens[k - 1].end]).accepted
    )
    if not cuts:
        return (gold[: tokens[0].end] if tokens else "",)
    return cuts


def _truncate_tail(gold: str, rng: random.Random) -> str:
    return rng.choice(_truncations(gold))


@lru_cache(maxsize=1024)
def _arrow_spans(gold: str) -> tuple[tuple[str, int, int, int], ...]:
    """(direction, offset of '<' or first '-', offset of last '-', offset of '>') per directed hop."""
    tokens = tokenize(gold)
    by_offset = {t.offset: i for i, t in enumerate(tokens)}
    spans = []
    for _, rel, _ in parse(gold).relationships():
        if rel.direction == "undirected":
            continue
        i = by_offset[rel.offset]
        j = i + 1 if rel.direction == "left" else i
        j += 1
        if tokens[j].is_symbol("["):
            depth = 0
            while True:
                if tokens[j].is_symbol("["):
                    depth += 1
                elif tokens[j].is_symbol("]"):
                    depth -= 1
                    if depth == 0:
                        break
                j += 1
            j += 1
        closing = tokens[j]
        arrow = tokens[j + 1] if rel.direction == "right" else None
        spans.append((rel.direction, tokens[i].offset, closing.offset,
                      arrow.offset if arrow is not None else -1))
    return tuple(spans)


def flip_arrow(gold: str, span: tuple[str, int, int, int]) -> str:
    direction, start, closing, arrow = span
    if direction == "right":
        # "-[..]->" becomes "<-[..]-"
        return gold[:start] + "<" + gold[start:arrow] + gold[arrow + 1 :]
    # "<-[..]-" becomes "-[..]->"
    return gold[:start] + gold[start + 1 : closing + 1] + ">" + gold[closing + 1 :]


def _flip_direction(gold: str, rng: random.Random) -> Optional[str]:
    try:
        spans = _arrow_spans(gold)
    except (CypherSyntaxError, LexError):
        return None
    if not spans:
        return None
    return flip_arrow(gold, rng.choice(spans))


def _label_sites(gold: str) -> list[tuple[int, int, str]]:
    """(start, end, 'label'|'type') for every label or relationship-type name."""
    tokens = tokenize(gold)
    stack: list[str] = []
    sites = []
    for i, tok in enumerate(tokens):
        if tok.kind == "symbol" and tok.text in "([{":
            stack.append(tok.text)
        elif tok.kind == "symbol" and tok.text in ")]}":
            if stack:
                stack.pop()
        elif tok.kind in ("identifier", "keyword") and i > 0 and tokens[i - 1].is_symbol(":", "|"):
            inner = stack[-1] if stack else ""
            if inner == "[":
                sites.append((tok.offset, tok.end, "type"))
            elif inner == "(" or not stack:
                sites.append((tok.offset, tok.end, "label"))
    return sites


def _label_swap(gold: str, rng: random.Random, schema: Optional[GraphSchema]) -> Optional[str]:
    if schema is None:
        return None
    options = _label_swaps(gold, schema)
    return rng.choice(options) if options else None


@lru_cache(maxsize=1024)
def _label_swaps(gold: str, schema: GraphSchema) -> tuple[str, ...]:
    labels = schema.labels
    types = sorted(schema.rel_type_index)
    options = []
    for start, end, what in _label_sites(gold):
        current = gold[start:end]
        for repl in (types if what == "type" else labels):
            if repl == current:
                continue
            mutant = gold[:start] + repl + gold[end:]
            try:
                tree = parse(mutant)
            except CypherSyntaxError:
                continue
            if schema_validate(extract_usages(tree), schema).accepted:
                options.append(mutant)
    return tuple(options)


def apply_mutation(gold: str, kind: str, rng: random.Random,
                   schema: Optional[GraphSchema] = None) -> tuple[str, str]:
    """Apply one mutation; returns (text, kind actually applied).

    Inapplicable kinds fall back to ``truncate_tail``.
    """
    if kind not in MUTATION_KINDS:
        raise ValueError(f"unknown mutation kind {kind!r}")
    if kind == "identity":
        return gold, "identity"
    result: Optional[str] = None
    if kind == "drop_bracket":
        result = _drop_bracket(gold, rng)
    elif kind == "duplicate_clause_keyword":
        result = _duplicate_keyword(gold, rng)
    elif kind == "flip_direction":
        result = _flip_direction(gold, rng)
    elif kind == "label_swap":
        result = _label_swap(gold, rng, schema)
    if result is None or kind == "truncate_tail":
        return _truncate_tail(gold, rng), "truncate_tail"
    return result, kind


def mutate(gold: str, kind: str, rng: random.Random, schema: Optional[GraphSchema] = None) -> str:
    return apply_mutation(gold, kind, rng, schema)[0]


# -- datasets ----------------------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    n_questions: int = 50
    n_traces: int = 16
    p_syntax_error: float = 0.4
    p_direction_error: float = 0.3
    p_label_error: float = 0.0
    confidence_gap: float = 1.0
    seed: int = 42
    base_confidence: float = 3.0
    trace_sigma: float = 0.4
    token_sigma: float = 0.3
    top_k: int = 5
    noise_rate: float = 0.2

    def __post_init__(self) -> None:
        probs = (self.p_syntax_error, self.p_direction_error, self.p_label_error)
        if any(p < 0 or p > 1 for p in probs):
            raise ValueError("error probabilities must lie in [0, 1]")
        if sum(probs) > 1 + 1e-12:
            raise ValueError("error probabilities must sum to at most 1")
        if self.confidence_gap < 0:
            raise ValueError("confidence_gap must be non-negative")
        if self.n_questions < 0 or self.n_traces < 1:
            raise ValueError("need n_questions >= 0 and n_traces >= 1")
        if self.top_k < 2:
            raise ValueError("top_k must be at least 2")


@dataclass(frozen=True)
class GoldItem:
    question: str
    gold_query: str


def default_gold_pool() -> list[GoldItem]:
    data = json.loads(resources.files("cypherfunnel").joinpath("data/gold_pool.json").read_text("utf-8"))
    return [GoldItem(d["question"], d["gold_query"]) for d in data]


def default_graph() -> MicroGraph:
    data = json.loads(resources.files("cypherfunnel").joinpath("data/movies_graph.json").read_text("utf-8"))
    return MicroGraph.from_dict(data)


def default_schema_text() -> str:
    return resources.files("cypherfunnel").joinpath("data/movies_schema.txt").read_text("utf-8")


def _draw_kind(rng: random.Random, cfg: SynthConfig) -> str:
    u = rng.random()
    if u < cfg.p_syntax_error:
        return rng.choice(SYNTAX_KINDS)
    u -= cfg.p_syntax_error
    if u < cfg.p_direction_error:
        return "flip_direction"
    u -= cfg.p_direction_error
    if u < cfg.p_label_error:
        return "label_swap"
    return "identity"


_PIECES = re.compile(r"\w+|[^\w\s]")
_MIN_CONFIDENCE = 0.2


def _token_step(conf: float, k: int) -> TokenStep:
    """Top-k log-probabilities whose negated mean equals ``conf`` (up to rounding)."""
    head = 0.01
    rest_total = k * conf - head
    weights = [0.5 + i / (k - 2) for i in range(k - 1)] if k > 2 else [1.0]
    scale = rest_total / sum(weights)
    values = [-head] + [-round(scale * w, 6) for w in weights]
    return TokenStep(tuple(values))


def _noisy(text: str, rng: random.Random, rate: float) -> str:
    u = rng.random()
    if u < rate / 2:
        return "cypher: " + text
    if u < rate:
        return f"```cypher\n{text};\n```"
    return text


def generate_detailed(golds: Sequence[GoldItem], graph: MicroGraph, config: SynthConfig,
                      schema_text: Optional[str] = None
                      ) -> tuple[list[QuestionRecord], dict[str, str]]:
    """Build the dataset and report which mutation produced every trace."""
    if not golds:
        raise SynthError("gold pool is empty")
    for g in golds:
        outcome = execute_micro(graph, g.gold_query)
        if not outcome.ok:
            raise SynthError(f"gold query fails on fixture: {g.gold_query!r} ({outcome.message})")
    schema_text = schema_text if schema_text is not None else default_schema_text()
    schema = parse_schema(schema_text)

    records: list[QuestionRecord] = []
    kinds: dict[str, str] = {}
    for i in range(config.n_questions):
        rng = random.Random(question_seed(config.seed, i))
        item = golds[i % len(golds)]
        qid = f"q{i:04d}"
        traces = []
        for j in range(config.n_traces):
            kind = _draw_kind(rng, config)
            text, applied = apply_mutation(item.gold_query, kind, rng, schema)
            corrupted = applied != "identity"
            mean = config.base_confidence - (config.confidence_gap if corrupted else 0.0)
            mean += rng.gauss(0.0, config.trace_sigma)
            n_tokens = max(1, len(_PIECES.findall(text)))
            steps = tuple(
                _token_step(max(_MIN_CONFIDENCE, rng.gauss(mean, config.token_sigma)), config.top_k)
                for _ in range(n_tokens)
            )
            trace_id = f"{qid}-t{j:02d}"
            kinds[trace_id] = applied
            traces.append(CandidateTrace(trace_id, _noisy(text, rng, config.noise_rate), steps))
        records.append(QuestionRecord(qid, item.question, item.gold_query, schema_text, tuple(traces)))
    return records, kinds


def generate(golds: Sequence[GoldItem], graph: MicroGraph, config: SynthConfig,
             schema_text: Optional[str] = None) -> list[QuestionRecord]:
    return generate_detailed(golds, graph, config, schema_text)[0]
