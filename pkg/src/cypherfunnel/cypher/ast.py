"""Parse-tree node types for the supported Cypher subset."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union


# -- expressions -------------------------------------------------------------

@dataclass
class Literal:
    value: object
    kind: str  # string, integer, float, boolean, null


@dataclass
class Parameter:
    name: str


@dataclass
class Variable:
    name: str


@dataclass
class PropertyAccess:
    subject: "Expr"
    key: str


@dataclass
class IndexAccess:
    subject: "Expr"
    index: Optional["Expr"]
    # slice when upper is present or the ".." form was used
    upper: Optional["Expr"] = None
    is_slice: bool = False


@dataclass
class LabelTest:
    subject: "Expr"
    labels: list[str]


@dataclass
class FunctionCall:
    name: str
    args: list["Expr"]
    distinct: bool = False
    star: bool = False


@dataclass
class ListLiteral:
    items: list["Expr"]


@dataclass
class MapLiteral:
    entries: list[tuple[str, "Expr"]]


@dataclass
class BinaryOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass
class UnaryOp:
    op: str
    operand: "Expr"


@dataclass
class CaseExpr:
    subject: Optional["Expr"]
    branches: list[tuple["Expr", "Expr"]]
    default: Optional["Expr"] = None


Expr = Union[
    Literal, Parameter, Variable, PropertyAccess, IndexAccess, LabelTest,
    FunctionCall, ListLiteral, MapLiteral, BinaryOp, UnaryOp, CaseExpr,
]


# -- patterns ----------------------------------------------------------------

@dataclass
class NodePattern:
    variable: Optional[str] = None
    labels: list[str] = field(default_factory=list)
    properties: Optional[MapLiteral | Parameter] = None
    offset: int = 0


@dataclass
class RelPattern:
    direction: str  # "right", "left" or "undirected"
    variable: Optional[str] = None
    types: list[str] = field(default_factory=list)
    length: Optional[tuple[Optional[int], Optional[int]]] = None
    properties: Optional[MapLiteral | Parameter] = None
    offset: int = 0


@dataclass
class PatternPart:
    """Alternating node, relationship, node, ... chain."""

    elements: list[Union[NodePattern, RelPattern]]
    variable: Optional[str] = None
    path_function: Optional[str] = None

    def hops(self) -> Iterator[tuple[NodePattern, RelPattern, NodePattern]]:
        for i in range(1, len(self.elements), 2):
            yield self.elements[i - 1], self.elements[i], self.elements[i + 1]


# -- clauses -----------------------------------------------------------------

@dataclass
class ProjectionItem:
    expression: Expr
    alias: Optional[str] = None


@dataclass
class SortItem:
    expression: Expr
    descending: bool = False


@dataclass
class Projection:
    distinct: bool
    items: list[ProjectionItem]
    star: bool = False
    order_by: list[SortItem] = field(default_factory=list)
    skip: Optional[Expr] = None
    limit: Optional[Expr] = None


@dataclass
class Match:
    patterns: list[PatternPart]
    optional: bool = False
    where: Optional[Expr] = None


@dataclass
class Unwind:
    expression: Expr
    alias: str


@dataclass
class With:
    projection: Projection
    where: Optional[Expr] = None


@dataclass
class Return:
    projection: Projection


@dataclass
class Create:
    patterns: list[PatternPart]


@dataclass
class SetItem:
    target: Expr
    op: str  # "=", "+=" or ":" for label assignment
    value: Optional[Expr] = None
    labels: list[str] = field(default_factory=list)


@dataclass
class SetClause:
    items: list[SetItem]


@dataclass
class Merge:
    pattern: PatternPart
    on_create: list[SetItem] = field(default_factory=list)
    on_match: list[SetItem] = field(default_factory=list)


@dataclass
class Delete:
    expressions: list[Expr]
    detach: bool = False


@dataclass
class RemoveItem:
    target: Expr
    labels: list[str] = field(default_factory=list)


@dataclass
class Remove:
    items: list[RemoveItem]


@dataclass
class Call:
    procedure: str
    args: Optional[list[Expr]]
    yield_items: list[tuple[str, Optional[str]]] = field(default_factory=list)
    yield_star: bool = False
    where: Optional[Expr] = None


Clause = Union[Match, Unwind, With, Return, Create, Merge, SetClause, Delete, Remove, Call]

UPDATING_CLAUSES = (Create, Merge, SetClause, Delete, Remove)


@dataclass
class Statement:
    clauses: list[Clause]


@dataclass
class CypherAst:
    statements: list[Statement]
    union_all: list[bool] = field(default_factory=list)

    def patterns(self) -> Iterator[PatternPart]:
        for stmt in self.statements:
            for clause in stmt.clauses:
                if isinstance(clause, (Match, Create)):
                    yield from clause.patterns
                elif isinstance(clause, Merge):
                    yield clause.pattern

    def relationships(self) -> Iterator[tuple[NodePattern, RelPattern, NodePattern]]:
        for part in self.patterns():
            yield from part.hops()
