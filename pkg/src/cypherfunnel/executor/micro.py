"""Micro Cypher engine: one MATCH hop, WHERE, RETURN, ORDER BY, LIMIT.

The engine has its own lexer and parser and deliberately shares nothing with
``cypherfunnel.cypher``: its syntax judgment is an independent check on the
grammar filter, the same way a real database disagrees with a grammar file.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Optional

from .graph import Edge, MicroGraph, Node

SUCCESS = "success"
SYNTAX_ERROR = "syntax_error"
RUNTIME_ERROR = "runtime_error"


@dataclass(frozen=True)
class ExecutionOutcome:
    status: str
    rows: Optional[tuple[tuple[Any, ...], ...]] = None
    message: str = ""
    columns: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if (self.rows is not None) != (self.status == SUCCESS):
            raise ValueError("rows must be present exactly when status is success")

    @property
    def ok(self) -> bool:
        return self.status == SUCCESS


class _SyntaxProblem(Exception):
    pass


class _Unsupported(Exception):
    pass


_WRITE_WORDS = {"CREATE", "MERGE", "SET", "DELETE", "DETACH", "REMOVE", "FOREACH", "LOAD"}
_UNSUPPORTED_WORDS = {
    "OPTIONAL", "WITH", "UNWIND", "SKIP", "UNION", "CALL", "CASE", "EXISTS", "CONTAINS",
    "STARTS", "ENDS", "IN", "XOR", "YIELD", "ALL",
}
_KNOWN_WORDS = {
    "MATCH", "WHERE", "RETURN", "DISTINCT", "AS", "ORDER", "BY", "ASC", "ASCENDING", "DESC",
    "DESCENDING", "LIMIT", "AND", "OR", "NOT", "IS", "NULL", "TRUE", "FALSE", "COUNT",
} | _WRITE_WORDS | _UNSUPPORTED_WORDS

# words that can never start a RETURN item
_NOT_AN_ITEM = {"MATCH", "RETURN", "WHERE", "ORDER", "BY", "LIMIT", "AS", "ASC", "DESC", "AND", "OR"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|//[^\n]*|/\*.*?\*/)
  | (?P<str>'(?:[^'\\]|\\.)*'|"(?:[^"\\]|\\.)*")
  | (?P<num>\d+\.\d+|\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*|`[^`]+`)
  | (?P<param>\$[A-Za-z0-9_]+)
  | (?P<op><>|<=|>=|=~|\.\.|[()\[\]{}:,.=<>\-*+/%|^;])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int

    @property
    def word(self) -> str:
        return self.text.upper() if self.kind == "name" else ""


def _lex(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise _SyntaxProblem(f"invalid input at position {pos}: {text[pos:pos + 10]!r}")
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    depth: list[str] = []
    pairs = {")": "(", "]": "[", "}": "{"}
    for t in toks:
        if t.kind != "op":
            continue
        if t.text in "([{":
            depth.append(t.text)
        elif t.text in pairs:
            if not depth or depth.pop() != pairs[t.text]:
                raise _SyntaxProblem(f"unbalanced '{t.text}' at position {t.pos}")
    if depth:
        raise _SyntaxProblem("unbalanced brackets: missing closing bracket")
    return toks


# -- parsed form -------------------------------------------------------------

@dataclass
class _NodePat:
    var: Optional[str]
    labels: list[str]
    props: dict[str, Any]


@dataclass
class _RelPat:
    var: Optional[str]
    type: Optional[str]
    props: dict[str, Any]
    direction: str  # out, in, both


@dataclass
class _Item:
    kind: str  # prop, var, count
    var: Optional[str] = None
    prop: Optional[str] = None
    alias: Optional[str] = None
    text: str = ""


@dataclass
class _Query:
    left: _NodePat
    rel: Optional[_RelPat]
    right: Optional[_NodePat]
    where: Any
    distinct: bool
    items: list[_Item]
    order: list[tuple[_Item, bool]]
    limit: Optional[int]


class _MicroParser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.i = 0

    def peek(self, k: int = 0) -> Optional[_Tok]:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def fail(self, expected: str) -> Exception:
        tok = self.peek()
        if tok is None:
            return _SyntaxProblem(f"unexpected end of input, expected {expected}")
        if tok.word in _WRITE_WORDS:
            return _Unsupported("read-only engine")
        if tok.word in _UNSUPPORTED_WORDS:
            return _Unsupported(f"unsupported construct: {tok.word}")
        if tok.kind == "param":
            return _Unsupported("unsupported construct: parameters")
        if tok.kind == "name" and tok.word not in _KNOWN_WORDS and self._is_op(1, "("):
            return _Unsupported(f"unsupported construct: function {tok.text}")
        if tok.kind == "op" and tok.text in ("*", "|", "+", "/", "%", "^", "=~", ",", "[", "..", "{"):
            return _Unsupported(f"unsupported construct: '{tok.text}'")
        if expected in ("RETURN", "WHERE or RETURN") and (
            self._is_op(0, "-") or (self._is_op(0, "<") and self._is_op(1, "-"))
        ):
            return _Unsupported("unsupported construct: multi-hop pattern")
        if tok.word == "MATCH" and expected in ("RETURN", "WHERE or RETURN"):
            return _Unsupported("unsupported construct: multiple MATCH clauses")
        return _SyntaxProblem(f"invalid input {tok.text!r} at position {tok.pos}, expected {expected}")

    def _is_op(self, k: int, text: str) -> bool:
        tok = self.peek(k)
        return tok is not None and tok.kind == "op" and tok.text == text

    def op(self, text: str) -> bool:
        if self._is_op(0, text):
            self.i += 1
            return True
        return False

    def need_op(self, text: str) -> None:
        if not self.op(text):
            raise self.fail(f"'{text}'")

    def kw(self, word: str) -> bool:
        tok = self.peek()
        if tok is not None and tok.word == word:
            self.i += 1
            return True
        return False

    def need_kw(self, word: str, expected: Optional[str] = None) -> None:
        if not self.kw(word):
            raise self.fail(expected or word)

    def name(self, what: str) -> str:
        tok = self.peek()
        if tok is None or tok.kind != "name" or (tok.word in _KNOWN_WORDS and not tok.text.startswith("`")):
            raise self.fail(what)
        self.i += 1
        return tok.text.strip("`")

    def symbolic(self, what: str) -> str:
        tok = self.peek()
        if tok is None or tok.kind != "name":
            raise self.fail(what)
        self.i += 1
        return tok.text.strip("`")

    def query(self) -> _Query:
        first = self.peek()
        if first is not None and first.word == "RETURN":
            nxt = self.peek(1)
            if nxt is None or nxt.word in _NOT_AN_ITEM or (nxt.kind == "op" and nxt.text in ")]},;"):
                self.i += 1
                raise self.fail("return item")
            raise _Unsupported("unsupported construct: RETURN without MATCH")
        self.need_kw("MATCH")
        left = self.node()
        rel = right = None
        if self._is_op(0, "-") or self._is_op(0, "<"):
            rel = self.rel()
            right = self.node()
        where = None
        if self.kw("WHERE"):
            where = self.cond()
        self.need_kw("RETURN", "WHERE or RETURN" if where is None else "RETURN")
        distinct = self.kw("DISTINCT")
        items = [self.item(True)]
        while self.op(","):
            items.append(self.item(True))
        order = []
        if self.kw("ORDER"):
            self.need_kw("BY")
            while True:
                it = self.item(False)
                desc = False
                if self.kw("DESC") or self.kw("DESCENDING"):
                    desc = True
                else:
                    self.kw("ASC") or self.kw("ASCENDING")
                order.append((it, desc))
                if not self.op(","):
                    break
        limit = None
        if self.kw("LIMIT"):
            tok = self.peek()
            if tok is None or tok.kind != "num" or "." in tok.text:
                raise self.fail("integer")
            limit = int(tok.text)
            self.i += 1
        self.op(";")
        if self.peek() is not None:
            raise self.fail("end of input")
        return _Query(left, rel, right, where, distinct, items, order, limit)

    def props(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        if not self.op("{"):
            return out
        if self.op("}"):
            return out
        while True:
            key = self.symbolic("property key")
            self.need_op(":")
            out[key] = self.literal()
            if self.op("}"):
                return out
            self.need_op(",")

    def node(self) -> _NodePat:
        self.need_op("(")
        var = None
        tok = self.peek()
        if tok is not None and tok.kind == "name" and tok.word not in _KNOWN_WORDS:
            var = self.name("variable")
        labels = []
        while self.op(":"):
            labels.append(self.symbolic("label"))
        props = self.props()
        self.need_op(")")
        return _NodePat(var, labels, props)

    def rel(self) -> _RelPat:
        incoming = self.op("<")
        self.need_op("-")
        var = rtype = None
        props: dict[str, Any] = {}
        if self.op("["):
            tok = self.peek()
            if tok is not None and tok.kind == "name" and tok.word not in _KNOWN_WORDS:
                var = self.name("variable")
            if self.op(":"):
                rtype = self.symbolic("relationship type")
            props = self.props()
            self.need_op("]")
        self.need_op("-")
        outgoing = self.op(">")
        if incoming and outgoing:
            raise _Unsupported("unsupported construct: bidirectional arrow")
        direction = "in" if incoming else "out" if outgoing else "both"
        return _RelPat(var, rtype, props, direction)

    def literal(self) -> Any:
        tok = self.peek()
        if tok is None:
            raise self.fail("literal")
        neg = False
        if tok.kind == "op" and tok.text == "-" and self.peek(1) is not None and self.peek(1).kind == "num":
            neg = True
            self.i += 1
            tok = self.peek()
        if tok.kind == "num":
            self.i += 1
            value = float(tok.text) if "." in tok.text else int(tok.text)
            return -value if neg else value
        if tok.kind == "str":
            self.i += 1
            return _unescape(tok.text[1:-1])
        if tok.word in ("TRUE", "FALSE"):
            self.i += 1
            return tok.word == "TRUE"
        if tok.word == "NULL":
            self.i += 1
            return None
        raise self.fail("literal")

    # conditions are nested tuples: ("or", a, b), ("and", a, b), ("not", a),
    # ("cmp", op, lhs, rhs), ("isnull", operand, negated)
    def cond(self) -> Any:
        left = self.cond_and()
        while self.kw("OR"):
            left = ("or", left, self.cond_and())
        return left

    def cond_and(self) -> Any:
        left = self.cond_not()
        while self.kw("AND"):
            left = ("and", left, self.cond_not())
        return left

    def cond_not(self) -> Any:
        if self.kw("NOT"):
            return ("not", self.cond_not())
        if self._is_op(0, "("):
            self.i += 1
            inner = self.cond()
            self.need_op(")")
            return inner
        lhs = self.operand()
        if self.kw("IS"):
            negated = self.kw("NOT")
            self.need_kw("NULL")
            return ("isnull", lhs, negated)
        tok = self.peek()
        if tok is None or tok.kind != "op" or tok.text not in ("=", "<>", "<", ">", "<=", ">="):
            raise self.fail("comparison operator")
        self.i += 1
        return ("cmp", tok.text, lhs, self.operand())

    def _reject_call(self) -> None:
        tok = self.peek()
        if tok is not None and tok.kind == "name" and self._is_op(1, "("):
            raise _Unsupported(f"unsupported construct: function {tok.text}")

    def operand(self) -> Any:
        self._reject_call()
        tok = self.peek()
        if tok is not None and tok.kind == "name" and tok.word not in _KNOWN_WORDS:
            var = self.name("variable")
            if self.op("."):
                return ("prop", var, self.symbolic("property key"))
            return ("var", var)
        return ("lit", self.literal())

    def item(self, allow_alias: bool) -> _Item:
        start = self.i
        tok = self.peek()
        if tok is not None and tok.word == "COUNT" and self._is_op(1, "("):
            self.i += 2
            if not self.op("*"):
                raise _Unsupported("unsupported construct: count(expression)")
            self.need_op(")")
            item = _Item("count")
        else:
            self._reject_call()
            var = self.name("variable")
            if self.op("."):
                item = _Item("prop", var, self.symbolic("property key"))
            else:
                item = _Item("var", var)
        item.text = "".join(t.text for t in self.toks[start:self.i])
        if allow_alias and self.kw("AS"):
            item.alias = self.name("alias")
        return item


def _unescape(body: str) -> str:
    return re.sub(r"\\(.)", lambda m: {"n": "\n", "t": "\t"}.get(m.group(1), m.group(1)), body)


# -- evaluation --------------------------------------------------------------

def _serialize(value: Any) -> Any:
    if isinstance(value, Node):
        out = {k: value.props[k] for k in sorted(value.props)}
        out["_labels"] = sorted(value.labels)
        return out
    if isinstance(value, Edge):
        out = {k: value.props[k] for k in sorted(value.props)}
        out["_type"] = value.type
        return out
    return value


def canonical(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _props_match(entity: Node | Edge, wanted: dict[str, Any]) -> bool:
    return all(k in entity.props and _equal(entity.props[k], v) for k, v in wanted.items())


def _equal(a: Any, b: Any) -> Optional[bool]:
    if a is None or b is None:
        return None
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    return a == b


def _compare(op: str, a: Any, b: Any) -> Optional[bool]:
    if op == "=":
        return _equal(a, b)
    if op == "<>":
        eq = _equal(a, b)
        return None if eq is None else not eq
    if a is None or b is None:
        return None
    numeric = (int, float)
    same = (
        (isinstance(a, numeric) and isinstance(b, numeric)
         and not isinstance(a, bool) and not isinstance(b, bool))
        or (isinstance(a, str) and isinstance(b, str))
    )
    if not same:
        return None
    return {"<": a < b, ">": a > b, "<=": a <= b, ">=": a >= b}[op]


def _sort_key(value: Any) -> tuple:
    # openCypher ascending order: maps/nodes/edges < lists < strings < booleans < numbers < null
    if value is None:
        return (9,)
    if isinstance(value, bool):
        return (6, value)
    if isinstance(value, (int, float)):
        return (7, value)
    if isinstance(value, str):
        return (5, value)
    if isinstance(value, list):
        return (4, canonical(value))
    return (1, canonical(_serialize(value)))


class MicroEngine:
    def __init__(self, graph: MicroGraph):
        self.graph = graph

    def execute(self, query: str) -> ExecutionOutcome:
        try:
            parsed = _MicroParser(_lex(query)).query()
        except _SyntaxProblem as exc:
            return ExecutionOutcome(SYNTAX_ERROR, message=str(exc))
        except _Unsupported as exc:
            return ExecutionOutcome(RUNTIME_ERROR, message=str(exc))
        try:
            return self._run(parsed)
        except _SyntaxProblem as exc:
            return ExecutionOutcome(SYNTAX_ERROR, message=str(exc))
        except _Unsupported as exc:
            return ExecutionOutcome(RUNTIME_ERROR, message=str(exc))

    def _bindings(self, q: _Query) -> list[dict[str, Any]]:
        def node_ok(node: Node, pat: _NodePat) -> bool:
            return all(lb in node.labels for lb in pat.labels) and _props_match(node, pat.props)

        out: list[dict[str, Any]] = []
        nodes = self.graph.nodes
        if q.rel is None:
            for node in nodes.values():
                if node_ok(node, q.left):
                    out.append({q.left.var: node} if q.left.var else {})
            return out
        for edge in self.graph.edges:
            if q.rel.type is not None and edge.type != q.rel.type:
                continue
            if not _props_match(edge, q.rel.props):
                continue
            ends = []
            if q.rel.direction in ("out", "both"):
                ends.append((edge.src, edge.dst))
            if q.rel.direction in ("in", "both") and not (
                q.rel.direction == "both" and edge.src == edge.dst
            ):
                ends.append((edge.dst, edge.src))
            for a_id, b_id in ends:
                a, b = nodes[a_id], nodes[b_id]
                if not (node_ok(a, q.left) and node_ok(b, q.right)):
                    continue
                binding: dict[str, Any] = {}
                clash = False
                for var, value in ((q.left.var, a), (q.rel.var, edge), (q.right.var, b)):
                    if var is None:
                        continue
                    if var in binding and binding[var] is not value:
                        clash = True
                    binding[var] = value
                if not clash:
                    out.append(binding)
        return out

    @staticmethod
    def _operand(binding: dict[str, Any], operand: tuple) -> Any:
        kind = operand[0]
        if kind == "lit":
            return operand[1]
        var = operand[1]
        if var not in binding:
            raise _SyntaxProblem(f"variable `{var}` not defined")
        value = binding[var]
        if kind == "var":
            return value
        return value.props.get(operand[2]) if value is not None else None

    def _truth(self, binding: dict[str, Any], cond: Any) -> Optional[bool]:
        tag = cond[0]
        if tag == "cmp":
            a = self._operand(binding, cond[2])
            b = self._operand(binding, cond[3])
            if isinstance(a, (Node, Edge)) or isinstance(b, (Node, Edge)):
                if cond[1] in ("=", "<>"):
                    same = a is b
                    return same if cond[1] == "=" else not same
                return None
            return _compare(cond[1], a, b)
        if tag == "isnull":
            value = self._operand(binding, cond[1])
            return (value is not None) if cond[2] else (value is None)
        if tag == "not":
            inner = self._truth(binding, cond[1])
            return None if inner is None else not inner
        left = self._truth(binding, cond[1])
        right = self._truth(binding, cond[2])
        if tag == "and":
            if left is False or right is False:
                return False
            return None if left is None or right is None else True
        if left is True or right is True:
            return True
        return None if left is None or right is None else False

    def _item_value(self, binding: dict[str, Any], item: _Item) -> Any:
        if item.kind == "var":
            return self._operand(binding, ("var", item.var))
        return self._operand(binding, ("prop", item.var, item.prop))

    @staticmethod
    def _check_scope(q: _Query) -> None:
        defined = {p.var for p in (q.left, q.rel, q.right) if p is not None and p.var}
        used: list[str] = []

        def walk(cond: Any) -> None:
            if cond[0] in ("and", "or"):
                walk(cond[1])
                walk(cond[2])
            elif cond[0] == "not":
                walk(cond[1])
            elif cond[0] == "isnull":
                if cond[1][0] != "lit":
                    used.append(cond[1][1])
            else:
                used.extend(o[1] for o in cond[2:] if o[0] != "lit")

        if q.where is not None:
            walk(q.where)
        used.extend(it.var for it in q.items if it.var)
        aliases = {it.alias for it in q.items if it.alias}
        used.extend(it.var for it, _ in q.order if it.var and not (it.kind == "var" and it.var in aliases))
        for var in used:
            if var not in defined:
                raise _SyntaxProblem(f"variable `{var}` not defined")

    def _run(self, q: _Query) -> ExecutionOutcome:
        self._check_scope(q)
        bindings = self._bindings(q)
        if q.where is not None:
            bindings = [b for b in bindings if self._truth(b, q.where) is True]
        columns = tuple(it.alias or it.text for it in q.items)

        # rows carry their source binding so ORDER BY can reach unprojected values
        aggregate = any(it.kind == "count" for it in q.items)
        rows: list[tuple[list[Any], Optional[dict[str, Any]]]] = []
        if aggregate:
            groups: dict[str, list[Any]] = {}
            order: list[str] = []
            for b in bindings:
                keys = [None if it.kind == "count" else self._item_value(b, it) for it in q.items]
                gk = canonical([_serialize(k) for k in keys])
                if gk not in groups:
                    groups[gk] = keys
                    order.append(gk)
                for idx, it in enumerate(q.items):
                    if it.kind == "count":
                        groups[gk][idx] = (groups[gk][idx] or 0) + 1
            if not bindings and all(it.kind == "count" for it in q.items):
                rows.append(([0] * len(q.items), None))
            rows.extend((groups[gk], None) for gk in order)
        else:
            for b in bindings:
                rows.append(([self._item_value(b, it) for it in q.items], b))

        if q.distinct:
            seen = set()
            unique = []
            for values, b in rows:
                key = canonical([_serialize(v) for v in values])
                if key not in seen:
                    seen.add(key)
                    unique.append((values, b))
            rows = unique

        if q.order:
            for it, desc in reversed(q.order):
                idx = self._projected_index(q, it)
                if idx is None and (aggregate or q.distinct):
                    raise _Unsupported("unsupported construct: ORDER BY on unprojected value")

                def key(row, idx=idx, it=it):
                    values, b = row
                    value = values[idx] if idx is not None else self._item_value(b, it)
                    return _sort_key(value)

                if desc:
                    # nulls stay last in both directions
                    nulls = [r for r in rows if key(r) == (9,)]
                    rest = [r for r in rows if key(r) != (9,)]
                    rows = sorted(rest, key=key, reverse=True) + nulls
                else:
                    rows = sorted(rows, key=key)
        else:
            rows.sort(key=lambda r: canonical([_serialize(v) for v in r[0]]))

        if q.limit is not None:
            rows = rows[: q.limit]
        result = tuple(tuple(_serialize(v) for v in values) for values, _ in rows)
        return ExecutionOutcome(SUCCESS, result, "", columns)

    @staticmethod
    def _projected_index(q: _Query, it: _Item) -> Optional[int]:
        for idx, proj in enumerate(q.items):
            if it.kind == "var" and proj.alias == it.var:
                return idx
            if proj.kind == it.kind and proj.var == it.var and proj.prop == it.prop:
                return idx
        return None


def execute_micro(graph: MicroGraph, query: str) -> ExecutionOutcome:
    return MicroEngine(graph).execute(query)
