"""Graph schema parsing and relationship-direction validation."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .cypher import CypherSyntaxError, LexError, ast, parse, tokenize, unquote
from .cypher.lexer import CypherToken
from .traces import FunnelRecord


class SchemaError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class SchemaTriple:
    source_label: str
    rel_type: str
    target_label: str

    def __post_init__(self) -> None:
        if not (self.source_label and self.rel_type and self.target_label):
            raise ValueError("schema triple fields must be non-empty")

    def __str__(self) -> str:
        return f"(:{self.source_label})-[:{self.rel_type}]->(:{self.target_label})"


@dataclass(frozen=True)
class GraphSchema:
    triples: frozenset[SchemaTriple]
    warnings: tuple[str, ...] = ()
    rel_type_index: dict[str, frozenset[tuple[str, str]]] = field(
        default=None, compare=False, repr=False  # type: ignore[assignment]
    )

    def __post_init__(self) -> None:
        index: dict[str, set[tuple[str, str]]] = {}
        for t in self.triples:
            index.setdefault(t.rel_type, set()).add((t.source_label, t.target_label))
        object.__setattr__(
            self, "rel_type_index", {k: frozenset(v) for k, v in sorted(index.items())}
        )

    @classmethod
    def of(cls, triples: Iterable[SchemaTriple | tuple[str, str, str]]) -> "GraphSchema":
        return cls(frozenset(t if isinstance(t, SchemaTriple) else SchemaTriple(*t) for t in triples))

    def with_triples(self, extra: Iterable[SchemaTriple]) -> "GraphSchema":
        return GraphSchema(self.triples | frozenset(extra), self.warnings)

    @property
    def labels(self) -> list[str]:
        return sorted({t.source_label for t in self.triples} | {t.target_label for t in self.triples})

    def to_text(self) -> str:
        return "\n".join(str(t) for t in sorted(self.triples))


_NAME = r"(?:`(?:[^`]|``)+`|[^\W\d]\w*)"
_TRIPLE_LINE = re.compile(
    rf"^\s*\(\s*:\s*({_NAME})\s*\)\s*-\s*\[\s*:\s*({_NAME})\s*\]\s*-\s*>\s*\(\s*:\s*({_NAME})\s*\)\s*,?\s*$"
)


def parse_schema(schema_text: str) -> GraphSchema:
    """Parse ``(:A)-[:R]->(:B)`` lines (or a JSON list of triples)."""
    stripped = schema_text.strip()
    if stripped.startswith("["):
        try:
            items = json.loads(stripped)
        except json.JSONDecodeError:
            items = None
        if isinstance(items, list):
            try:
                triples = frozenset(
                    SchemaTriple(str(i["source"]), str(i["type"]), str(i["target"])) for i in items
                )
            except (TypeError, KeyError, ValueError) as exc:
                raise SchemaError(f"bad schema triple list: {exc}") from exc
            if not triples:
                raise SchemaError("schema contains no triples")
            return GraphSchema(triples)

    triples: set[SchemaTriple] = set()
    warnings: list[str] = []
    for lineno, line in enumerate(schema_text.splitlines(), start=1):
        if not line.strip():
            continue
        m = _TRIPLE_LINE.match(line)
        if m is None:
            warnings.append(f"line {lineno}: not a schema triple: {line.strip()!r}")
            continue
        triples.add(SchemaTriple(*(unquote(g) for g in m.groups())))
    if not triples:
        raise SchemaError("schema contains no parsable (:A)-[:R]->(:B) lines")
    return GraphSchema(frozenset(triples), tuple(warnings))


@dataclass(frozen=True)
class RelUsage:
    source_labels: frozenset[str]
    rel_types: frozenset[str]
    target_labels: frozenset[str]
    directed: bool
    offset: int = 0

    def describe(self) -> str:
        src = ":".join(sorted(self.source_labels))
        tgt = ":".join(sorted(self.target_labels))
        types = "|".join(sorted(self.rel_types)) or "*"
        arrow = "->" if self.directed else "-"
        return f"(:{src})-[:{types}]{arrow}(:{tgt})"


def _usage(left: Sequence[str], types: Sequence[str], right: Sequence[str],
           direction: str, offset: int) -> RelUsage:
    if direction == "left":
        left, right = right, left
    return RelUsage(frozenset(left), frozenset(types), frozenset(right),
                    direction != "undirected", offset)


def extract_usages(query: ast.CypherAst) -> list[RelUsage]:
    """One usage per relationship pattern; left-pointing ones are mirrored."""
    return [
        _usage(a.labels, rel.types, b.labels, rel.direction, rel.offset)
        for a, rel, b in query.relationships()
    ]


# -- token-stream fallback for queries without an AST ------------------------

def _scan_node(tokens: list[CypherToken], i: int) -> Optional[tuple[list[str], int]]:
    """Labels of a node pattern starting at ``tokens[i] == '('``, and the index after it."""
    if i >= len(tokens) or not tokens[i].is_symbol("("):
        return None
    j = i + 1
    if j < len(tokens) and tokens[j].kind == "identifier":
        j += 1
    labels = []
    while j + 1 < len(tokens) and tokens[j].is_symbol(":") and tokens[j + 1].kind in ("identifier", "keyword"):
        labels.append(unquote(tokens[j + 1].text))
        j += 2
    depth = 0
    while j < len(tokens):
        tok = tokens[j]
        if tok.is_symbol("{"):
            depth += 1
        elif tok.is_symbol("}"):
            depth -= 1
        elif tok.is_symbol(")") and depth == 0:
            return labels, j + 1
        elif tok.is_symbol("(", "[", "]") and depth == 0:
            return None
        j += 1
    return None


def _scan_rel(tokens: list[CypherToken], i: int) -> Optional[tuple[str, list[str], int]]:
    """Direction and types of an explicit ``-[...]->`` / ``<-[...]-`` starting at i."""
    n = len(tokens)
    left = i < n and tokens[i].is_symbol("<")
    j = i + 1 if left else i
    if not (j + 1 < n and tokens[j].is_symbol("-") and tokens[j + 1].is_symbol("[")):
        return None
    j += 2
    types: list[str] = []
    in_props = False
    while j < n and not tokens[j].is_symbol("]"):
        tok = tokens[j]
        if tok.is_symbol("{", "*"):
            in_props = True
        if not in_props and tok.is_symbol(":", "|") and j + 1 < n and tokens[j + 1].kind in ("identifier", "keyword"):
            if tok.text == ":" or not tokens[j - 1].is_symbol(":"):
                types.append(unquote(tokens[j + 1].text))
                j += 2
                continue
        if tok.is_symbol("(", ")", "["):
            return None
        j += 1
    if not (j + 1 < n and tokens[j].is_symbol("]") and tokens[j + 1].is_symbol("-")):
        return None
    j += 2
    right = j < n and tokens[j].is_symbol(">")
    if right:
        j += 1
    if left == right:
        return None
    return ("left" if left else "right"), types, j


def scan_usages(text: str) -> list[RelUsage]:
    """Best-effort usage extraction from the token stream of unparsed text."""
    try:
        tokens = tokenize(text)
    except LexError:
        return []
    usages: list[RelUsage] = []
    i = 0
    while i < len(tokens):
        node = _scan_node(tokens, i)
        if node is None:
            i += 1
            continue
        labels, j = node
        while True:
            rel = _scan_rel(tokens, j)
            if rel is None:
                break
            direction, types, k = rel
            nxt = _scan_node(tokens, k)
            if nxt is None:
                break
            usages.append(_usage(labels, types, nxt[0], direction, tokens[j].offset))
            labels, j = nxt
        i = max(i + 1, j)
    return usages


def usages_for(text: str, query: Optional[ast.CypherAst] = None, *,
               scan_only: bool = False) -> list[RelUsage]:
    if scan_only:
        return scan_usages(text)
    if query is None:
        try:
            query = parse(text)
        except CypherSyntaxError:
            return scan_usages(text)
    return extract_usages(query)


# -- validation --------------------------------------------------------------

@dataclass(frozen=True)
class SchemaVerdict:
    accepted: bool
    violations: tuple[tuple[RelUsage, str], ...] = ()

    @property
    def message(self) -> str:
        return "; ".join(f"{u.describe()} at offset {u.offset}: {why}" for u, why in self.violations)


def _compatible(pairs: Iterable[tuple[str, str]], sources: frozenset[str],
                targets: frozenset[str]) -> bool:
    return any((not sources or s in sources) and (not targets or t in targets) for s, t in pairs)


def check_usage(usage: RelUsage, schema: GraphSchema, *, strict: bool = False,
                label_mode: str = "label-aware") -> Optional[str]:
    """Reason the usage violates the schema, or None when it passes."""
    if not usage.directed:
        return None
    for rel_type in sorted(usage.rel_types):
        pairs = schema.rel_type_index.get(rel_type)
        if pairs is None:
            if strict:
                return f"relationship type {rel_type} not in schema"
            continue
        if _compatible(pairs, usage.source_labels, usage.target_labels):
            continue
        if _compatible(pairs, usage.target_labels, usage.source_labels):
            return f"{rel_type} used in the opposite direction"
        if label_mode == "label-aware":
            return f"{rel_type} does not connect these labels"
    return None


def schema_validate(usages: Sequence[RelUsage], schema: GraphSchema, *, strict: bool = False,
                    label_mode: str = "label-aware") -> SchemaVerdict:
    if not schema.triples:
        raise SchemaError("schema validation needs a non-empty schema")
    violations = []
    for usage in usages:
        reason = check_usage(usage, schema, strict=strict, label_mode=label_mode)
        if reason is not None:
            violations.append((usage, reason))
    return SchemaVerdict(not violations, tuple(violations))


@dataclass
class SchemaOutcome:
    survivors: list[int]
    records: list[FunnelRecord]


def schema_filter(candidates: Sequence[tuple[str, str]], schema: Optional[GraphSchema], *,
                  enabled: bool = True, asts: Optional[Sequence[Optional[ast.CypherAst]]] = None,
                  strict: bool = False, label_mode: str = "label-aware",
                  scan_only: bool = False) -> SchemaOutcome:
    """Drop (trace_id, text) candidates whose relationship directions contradict the schema."""
    if not enabled:
        return SchemaOutcome(list(range(len(candidates))), [])
    if schema is None:
        raise SchemaError("schema filter enabled but no schema given")
    survivors, records = [], []
    for i, (trace_id, text) in enumerate(candidates):
        tree = asts[i] if asts is not None else None
        verdict = schema_validate(usages_for(text, tree, scan_only=scan_only), schema, strict=strict,
                                  label_mode=label_mode)
        if verdict.accepted:
            survivors.append(i)
        else:
            records.append(FunnelRecord(trace_id, "schema", verdict.message))
    return SchemaOutcome(survivors, records)
