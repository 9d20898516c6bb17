"""Recursive-descent parser for the documented Cypher subset.

The grammar lives in ``docs/cypher_subset.ebnf``. There is no error
recovery: the first unexpected token ends the parse.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import ast
from .lexer import CypherToken, LexError, tokenize, unquote

CLAUSE_STARTERS = ("MATCH", "OPTIONAL", "UNWIND", "WITH", "RETURN", "CREATE", "MERGE",
                   "SET", "DELETE", "DETACH", "REMOVE", "CALL", "FOREACH", "LOAD")
COMPARISON_OPS = ("=", "<>", "<", ">", "<=", ">=", "=~")


@dataclass(frozen=True)
class Diagnostic:
    offset: int
    line: int
    column: int
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.message}"


@dataclass(frozen=True)
class SyntaxVerdict:
    accepted: bool
    diagnostics: tuple[Diagnostic, ...] = field(default=())

    @classmethod
    def ok(cls) -> "SyntaxVerdict":
        return cls(True, ())

    @classmethod
    def reject(cls, *diagnostics: Diagnostic) -> "SyntaxVerdict":
        return cls(False, tuple(diagnostics))

    @property
    def message(self) -> str:
        return "; ".join(str(d) for d in self.diagnostics)


class CypherSyntaxError(ValueError):
    def __init__(self, diagnostic: Diagnostic, expected: frozenset[str] = frozenset()):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic
        self.expected = expected

    @property
    def verdict(self) -> SyntaxVerdict:
        return SyntaxVerdict.reject(self.diagnostic)


def lex_diagnostic(exc: LexError) -> Diagnostic:
    return Diagnostic(exc.offset, exc.line, exc.column, exc.message)


def _describe(tok: CypherToken) -> str:
    if tok.kind == "eof":
        return "end of input"
    return f"{tok.kind} {tok.text!r}"


class _Parser:
    def __init__(self, text: str, tokens: list[CypherToken]):
        self.tokens = tokens
        last_line = text.count("\n") + 1
        last_col = len(text) - (text.rfind("\n") + 1) + 1
        self.eof = CypherToken("eof", "", len(text), last_line, last_col)
        self.i = 0

    # -- token helpers -------------------------------------------------------

    def peek(self, k: int = 0) -> CypherToken:
        j = self.i + k
        return self.tokens[j] if j < len(self.tokens) else self.eof

    def next(self) -> CypherToken:
        tok = self.peek()
        self.i += 1
        return tok

    def at_keyword(self, *words: str) -> bool:
        return self.peek().is_keyword(*words)

    def at_symbol(self, *symbols: str) -> bool:
        return self.peek().is_symbol(*symbols)

    def accept_keyword(self, *words: str) -> Optional[CypherToken]:
        if self.at_keyword(*words):
            return self.next()
        return None

    def accept_symbol(self, *symbols: str) -> Optional[CypherToken]:
        if self.at_symbol(*symbols):
            return self.next()
        return None

    def error(self, message: str, expected: frozenset[str] | set[str] = frozenset(),
              tok: Optional[CypherToken] = None) -> CypherSyntaxError:
        tok = tok or self.peek()
        expected = frozenset(expected)
        if expected:
            message = f"{message} (expected one of: {', '.join(sorted(expected))})"
        diag = Diagnostic(tok.offset, tok.line, tok.column, f"{message}, found {_describe(tok)}")
        return CypherSyntaxError(diag, expected)

    def expect_symbol(self, symbol: str, context: str = "") -> CypherToken:
        if self.at_symbol(symbol):
            return self.next()
        msg = f"expected {symbol!r}" + (f" {context}" if context else "")
        raise self.error(msg, {symbol})

    def expect_keyword(self, word: str, context: str = "") -> CypherToken:
        if self.at_keyword(word):
            return self.next()
        msg = f"expected {word}" + (f" {context}" if context else "")
        raise self.error(msg, {word})

    def variable_name(self, context: str) -> str:
        tok = self.peek()
        if tok.kind == "identifier":
            self.next()
            return unquote(tok.text)
        raise self.error(f"expected variable {context}", {"identifier"})

    def symbolic_name(self, context: str) -> str:
        # labels, relationship types, property keys and map keys may be keywords
        tok = self.peek()
        if tok.kind in ("identifier", "keyword"):
            self.next()
            return unquote(tok.text)
        raise self.error(f"expected name {context}", {"identifier"})

    # -- query structure -----------------------------------------------------

    def query(self) -> ast.CypherAst:
        statements = [self.statement()]
        union_all: list[bool] = []
        while self.accept_keyword("UNION"):
            union_all.append(self.accept_keyword("ALL") is not None)
            statements.append(self.statement())
        self.accept_symbol(";")
        if self.peek().kind != "eof":
            raise self.error("unexpected token after end of query", {"UNION", "end of input"})
        return ast.CypherAst(statements, union_all)

    def statement(self) -> ast.Statement:
        clauses: list[ast.Clause] = []
        while True:
            tok = self.peek()
            if tok.kind == "eof" or tok.is_keyword("UNION") or tok.is_symbol(";"):
                break
            clause = self.clause()
            clauses.append(clause)
            if isinstance(clause, ast.Return):
                nxt = self.peek()
                if not (nxt.kind == "eof" or nxt.is_keyword("UNION") or nxt.is_symbol(";")):
                    message = ("RETURN must be the final clause" if nxt.is_keyword(*CLAUSE_STARTERS)
                               else "unexpected token after RETURN items")
                    raise self.error(message, {"UNION", "end of input"})
                break
        if not clauses:
            raise self.error("expected clause", set(CLAUSE_STARTERS) - {"FOREACH", "LOAD"})
        last = clauses[-1]
        if not isinstance(last, (ast.Return, *ast.UPDATING_CLAUSES)):
            raise self.error(
                f"query cannot end with {type(last).__name__.upper()}",
                {"RETURN", "CREATE", "MERGE", "SET", "DELETE", "REMOVE"},
            )
        return ast.Statement(clauses)

    def clause(self) -> ast.Clause:
        tok = self.peek()
        word = tok.upper if tok.kind == "keyword" else None
        if word == "MATCH":
            return self.match(optional=False)
        if word == "OPTIONAL":
            self.next()
            if not self.at_keyword("MATCH"):
                raise self.error("expected MATCH after OPTIONAL", {"MATCH"})
            return self.match(optional=True)
        if word == "UNWIND":
            self.next()
            expr = self.expression()
            self.expect_keyword("AS", "in UNWIND")
            return ast.Unwind(expr, self.variable_name("after AS"))
        if word == "WITH":
            self.next()
            projection = self.projection("WITH")
            where = self.expression() if self.accept_keyword("WHERE") else None
            return ast.With(projection, where)
        if word == "RETURN":
            self.next()
            return ast.Return(self.projection("RETURN"))
        if word == "CREATE":
            self.next()
            return ast.Create(self.pattern())
        if word == "MERGE":
            return self.merge()
        if word == "SET":
            self.next()
            return ast.SetClause(self.set_items())
        if word in ("DELETE", "DETACH"):
            detach = self.accept_keyword("DETACH") is not None
            self.expect_keyword("DELETE", "after DETACH")
            exprs = [self.expression()]
            while self.accept_symbol(","):
                exprs.append(self.expression())
            return ast.Delete(exprs, detach)
        if word == "REMOVE":
            self.next()
            return ast.Remove(self.remove_items())
        if word == "CALL":
            return self.call()
        if word == "FOREACH":
            raise self.error("FOREACH is outside the supported subset")
        if word == "LOAD":
            raise self.error("LOAD CSV is outside the supported subset")
        raise self.error("expected clause", set(CLAUSE_STARTERS) - {"FOREACH", "LOAD"})

    def match(self, optional: bool) -> ast.Match:
        self.expect_keyword("MATCH")
        patterns = self.pattern()
        where = self.expression() if self.accept_keyword("WHERE") else None
        return ast.Match(patterns, optional, where)

    def merge(self) -> ast.Merge:
        self.expect_keyword("MERGE")
        clause = ast.Merge(self.pattern_part())
        while self.at_keyword("ON"):
            self.next()
            which = self.accept_keyword("CREATE", "MATCH")
            if which is None:
                raise self.error("expected CREATE or MATCH after ON", {"CREATE", "MATCH"})
            self.expect_keyword("SET", f"after ON {which.upper}")
            items = self.set_items()
            (clause.on_create if which.upper == "CREATE" else clause.on_match).extend(items)
        return clause

    def set_items(self) -> list[ast.SetItem]:
        items = [self.set_item()]
        while self.accept_symbol(","):
            items.append(self.set_item())
        return items

    def set_item(self) -> ast.SetItem:
        name = self.variable_name("in SET")
        target: ast.Expr = ast.Variable(name)
        if self.at_symbol(":"):
            return ast.SetItem(target, ":", labels=self.node_labels())
        if self.at_symbol("+="):
            self.next()
            return ast.SetItem(target, "+=", self.expression())
        while self.accept_symbol("."):
            target = ast.PropertyAccess(target, self.symbolic_name("after '.'"))
        if not self.accept_symbol("="):
            raise self.error("expected '=' in SET item", {"=", "+=", ":", "."})
        return ast.SetItem(target, "=", self.expression())

    def remove_items(self) -> list[ast.RemoveItem]:
        items = []
        while True:
            name = self.variable_name("in REMOVE")
            target: ast.Expr = ast.Variable(name)
            if self.at_symbol(":"):
                items.append(ast.RemoveItem(target, self.node_labels()))
            else:
                if not self.at_symbol("."):
                    raise self.error("expected property or label in REMOVE", {".", ":"})
                while self.accept_symbol("."):
                    target = ast.PropertyAccess(target, self.symbolic_name("after '.'"))
                items.append(ast.RemoveItem(target))
            if not self.accept_symbol(","):
                return items

    def call(self) -> ast.Call:
        self.expect_keyword("CALL")
        if self.at_symbol("{"):
            raise self.error("CALL subqueries are outside the supported subset")
        name = self.qualified_name("procedure name")
        args = None
        if self.accept_symbol("("):
            args = []
            if not self.at_symbol(")"):
                args.append(self.expression())
                while self.accept_symbol(","):
                    args.append(self.expression())
            self.expect_symbol(")", "to close procedure arguments")
        clause = ast.Call(name, args)
        if self.accept_keyword("YIELD"):
            if self.accept_symbol("*"):
                clause.yield_star = True
            else:
                while True:
                    field_name = self.symbolic_name("in YIELD")
                    alias = self.variable_name("after AS") if self.accept_keyword("AS") else None
                    clause.yield_items.append((field_name, alias))
                    if not self.accept_symbol(","):
                        break
                if self.accept_keyword("WHERE"):
                    clause.where = self.expression()
        return clause

    def qualified_name(self, context: str) -> str:
        tok = self.peek()
        if tok.kind != "identifier":
            raise self.error(f"expected {context}", {"identifier"})
        parts = [unquote(self.next().text)]
        while self.at_symbol(".") and self.peek(1).kind in ("identifier", "keyword"):
            self.next()
            parts.append(unquote(self.next().text))
        return ".".join(parts)

    def projection(self, clause_name: str) -> ast.Projection:
        distinct = self.accept_keyword("DISTINCT") is not None
        items: list[ast.ProjectionItem] = []
        star = False
        if self.accept_symbol("*"):
            star = True
            if self.accept_symbol(","):
                items.append(self.projection_item(clause_name))
        else:
            items.append(self.projection_item(clause_name))
        while self.accept_symbol(","):
            items.append(self.projection_item(clause_name))
        proj = ast.Projection(distinct, items, star)
        if self.accept_keyword("ORDER"):
            self.expect_keyword("BY", "after ORDER")
            while True:
                expr = self.expression()
                desc = False
                if self.accept_keyword("DESC", "DESCENDING"):
                    desc = True
                else:
                    self.accept_keyword("ASC", "ASCENDING")
                proj.order_by.append(ast.SortItem(expr, desc))
                if not self.accept_symbol(","):
                    break
        if self.accept_keyword("SKIP"):
            proj.skip = self.expression()
        if self.accept_keyword("LIMIT"):
            proj.limit = self.expression()
        return proj

    def projection_item(self, clause_name: str) -> ast.ProjectionItem:
        tok = self.peek()
        if tok.kind == "eof" or tok.is_keyword(*CLAUSE_STARTERS, "UNION", "ORDER", "SKIP",
                                                "LIMIT", "WHERE"):
            raise self.error(f"expected {clause_name.lower()} item after {clause_name}",
                             {"expression"})
        expr = self.expression()
        alias = self.variable_name("after AS") if self.accept_keyword("AS") else None
        return ast.ProjectionItem(expr, alias)

    # -- patterns ------------------------------------------------------------

    def pattern(self) -> list[ast.PatternPart]:
        parts = [self.pattern_part()]
        while self.accept_symbol(","):
            parts.append(self.pattern_part())
        return parts

    def pattern_part(self) -> ast.PatternPart:
        variable = None
        if self.peek().kind == "identifier" and self.peek(1).is_symbol("="):
            variable = unquote(self.next().text)
            self.next()
        tok = self.peek()
        if (tok.kind == "identifier" and tok.text.lower() in ("shortestpath", "allshortestpaths")
                and self.peek(1).is_symbol("(")):
            self.next()
            self.next()
            part = self.pattern_chain()
            self.expect_symbol(")", f"to close {tok.text}")
            part.path_function = tok.text
            part.variable = variable
            return part
        part = self.pattern_chain()
        part.variable = variable
        return part

    def pattern_chain(self) -> ast.PatternPart:
        elements: list = [self.node_pattern()]
        while self.at_symbol("<", "-"):
            elements.append(self.rel_pattern())
            elements.append(self.node_pattern())
        return ast.PatternPart(elements)

    def node_pattern(self) -> ast.NodePattern:
        open_tok = self.expect_symbol("(", "to start node pattern")
        node = ast.NodePattern(offset=open_tok.offset)
        if self.peek().kind == "identifier":
            node.variable = unquote(self.next().text)
        if self.at_symbol(":"):
            node.labels = self.node_labels()
        if self.at_symbol("{") or self.peek().kind == "parameter":
            node.properties = self.properties()
        if not self.at_symbol(")"):
            raise self.error("expected ')' to close node pattern", {")", ":", "{"})
        self.next()
        return node

    def node_labels(self) -> list[str]:
        labels = []
        while self.accept_symbol(":"):
            labels.append(self.symbolic_name("after ':'"))
        return labels

    def properties(self) -> ast.MapLiteral | ast.Parameter:
        if self.peek().kind == "parameter":
            return ast.Parameter(self.next().text[1:])
        return self.map_literal()

    def rel_pattern(self) -> ast.RelPattern:
        start = self.peek()
        left = self.accept_symbol("<") is not None
        self.expect_symbol("-", "in relationship pattern")
        rel = ast.RelPattern("undirected", offset=start.offset)
        if self.accept_symbol("["):
            if self.peek().kind == "identifier":
                rel.variable = unquote(self.next().text)
            if self.accept_symbol(":"):
                rel.types.append(self.symbolic_name("after ':'"))
                while self.accept_symbol("|"):
                    self.accept_symbol(":")
                    rel.types.append(self.symbolic_name("after '|'"))
            if self.accept_symbol("*"):
                rel.length = self.range_literal()
            if self.at_symbol("{") or self.peek().kind == "parameter":
                rel.properties = self.properties()
            if not self.at_symbol("]"):
                raise self.error("expected ']' to close relationship pattern",
                                 {"]", ":", "*", "{"})
            self.next()
        self.expect_symbol("-", "in relationship pattern")
        right = self.accept_symbol(">") is not None
        if left and not right:
            rel.direction = "left"
        elif right and not left:
            rel.direction = "right"
        return rel

    def range_literal(self) -> tuple[Optional[int], Optional[int]]:
        low = high = None
        if self.peek().kind == "integer":
            low = int(self.next().text, 0)
            high = low
        if self.accept_symbol(".."):
            high = None
            if self.peek().kind == "integer":
                high = int(self.next().text, 0)
        return (low, high)

    # -- expressions ---------------------------------------------------------

    def expression(self) -> ast.Expr:
        return self.or_expr()

    def or_expr(self) -> ast.Expr:
        left = self.xor_expr()
        while self.accept_keyword("OR"):
            left = ast.BinaryOp("OR", left, self.xor_expr())
        return left

    def xor_expr(self) -> ast.Expr:
        left = self.and_expr()
        while self.accept_keyword("XOR"):
            left = ast.BinaryOp("XOR", left, self.and_expr())
        return left

    def and_expr(self) -> ast.Expr:
        left = self.not_expr()
        while self.accept_keyword("AND"):
            left = ast.BinaryOp("AND", left, self.not_expr())
        return left

    def not_expr(self) -> ast.Expr:
        if self.accept_keyword("NOT"):
            return ast.UnaryOp("NOT", self.not_expr())
        return self.comparison()

    def comparison(self) -> ast.Expr:
        left = self.additive()
        while self.at_symbol(*COMPARISON_OPS):
            op = self.next().text
            left = ast.BinaryOp(op, left, self.additive())
        return left

    def additive(self) -> ast.Expr:
        left = self.multiplicative()
        while self.at_symbol("+", "-"):
            op = self.next().text
            left = ast.BinaryOp(op, left, self.multiplicative())
        return left

    def multiplicative(self) -> ast.Expr:
        left = self.power()
        while self.at_symbol("*", "/", "%"):
            op = self.next().text
            left = ast.BinaryOp(op, left, self.power())
        return left

    def power(self) -> ast.Expr:
        left = self.unary()
        while self.accept_symbol("^"):
            left = ast.BinaryOp("^", left, self.unary())
        return left

    def unary(self) -> ast.Expr:
        if self.at_symbol("+", "-"):
            op = self.next().text
            return ast.UnaryOp(op, self.unary())
        return self.postfix()

    def postfix(self) -> ast.Expr:
        expr = self.accessor()
        while True:
            if self.at_keyword("STARTS", "ENDS"):
                op = self.next().upper
                self.expect_keyword("WITH", f"after {op}")
                expr = ast.BinaryOp(f"{op} WITH", expr, self.accessor())
            elif self.accept_keyword("CONTAINS"):
                expr = ast.BinaryOp("CONTAINS", expr, self.accessor())
            elif self.accept_keyword("IN"):
                expr = ast.BinaryOp("IN", expr, self.accessor())
            elif self.accept_keyword("IS"):
                negated = self.accept_keyword("NOT") is not None
                self.expect_keyword("NULL", "after IS" + (" NOT" if negated else ""))
                expr = ast.UnaryOp("IS NOT NULL" if negated else "IS NULL", expr)
            else:
                return expr

    def accessor(self) -> ast.Expr:
        expr = self.atom()
        while True:
            if self.at_symbol("."):
                self.next()
                expr = ast.PropertyAccess(expr, self.symbolic_name("after '.'"))
            elif self.at_symbol("["):
                self.next()
                lower = None
                if not self.at_symbol(".."):
                    lower = self.expression()
                if self.accept_symbol(".."):
                    upper = None if self.at_symbol("]") else self.expression()
                    expr = ast.IndexAccess(expr, lower, upper, is_slice=True)
                else:
                    expr = ast.IndexAccess(expr, lower)
                self.expect_symbol("]", "to close index")
            elif self.at_symbol(":") and isinstance(expr, ast.Variable):
                expr = ast.LabelTest(expr, self.node_labels())
            else:
                return expr

    def atom(self) -> ast.Expr:
        tok = self.peek()
        kind = tok.kind
        if kind == "string":
            self.next()
            return ast.Literal(unquote(tok.text), "string")
        if kind == "integer":
            self.next()
            return ast.Literal(int(tok.text, 0), "integer")
        if kind == "float":
            self.next()
            return ast.Literal(float(tok.text), "float")
        if kind == "parameter":
            self.next()
            return ast.Parameter(tok.text[1:])
        if kind == "keyword":
            word = tok.upper
            if word in ("TRUE", "FALSE"):
                self.next()
                return ast.Literal(word == "TRUE", "boolean")
            if word == "NULL":
                self.next()
                return ast.Literal(None, "null")
            if word == "CASE":
                return self.case_expr()
            if word == "EXISTS":
                if self.peek(1).is_symbol("{"):
                    raise self.error("EXISTS subqueries are outside the supported subset")
                if self.peek(1).is_symbol("("):
                    self.next()
                    return self.call_args("exists", tok)
            raise self.error("expected expression", {"expression"})
        if kind == "identifier":
            if self.peek(1).is_symbol("(") or (
                self.peek(1).is_symbol(".") and self._namespaced_call_ahead()
            ):
                name = self.qualified_name("function name")
                return self.call_args(name, tok)
            self.next()
            return ast.Variable(unquote(tok.text))
        if tok.is_symbol("["):
            return self.list_literal()
        if tok.is_symbol("{"):
            return self.map_literal()
        if tok.is_symbol("("):
            self.next()
            expr = self.expression()
            self.expect_symbol(")", "to close parenthesized expression")
            return expr
        raise self.error("expected expression", {"expression"})

    def _namespaced_call_ahead(self) -> bool:
        j = 1
        while self.peek(j).is_symbol(".") and self.peek(j + 1).kind in ("identifier", "keyword"):
            j += 2
        return self.peek(j).is_symbol("(")

    def call_args(self, name: str, tok: CypherToken) -> ast.FunctionCall:
        self.expect_symbol("(", f"after {name}")
        call = ast.FunctionCall(name, [])
        if self.accept_symbol("*"):
            if name.lower() != "count":
                raise self.error("'*' argument only allowed in count()", tok=tok)
            call.star = True
            self.expect_symbol(")", "to close count(*)")
            return call
        call.distinct = self.accept_keyword("DISTINCT") is not None
        if not self.at_symbol(")"):
            call.args.append(self.expression())
            while self.accept_symbol(","):
                call.args.append(self.expression())
        self.expect_symbol(")", f"to close {name}(")
        return call

    def list_literal(self) -> ast.ListLiteral:
        self.expect_symbol("[")
        items = []
        if not self.at_symbol("]"):
            items.append(self.expression())
            while self.accept_symbol(","):
                items.append(self.expression())
        if not self.at_symbol("]"):
            raise self.error("expected ']' to close list", {"]", ","})
        self.next()
        return ast.ListLiteral(items)

    def map_literal(self) -> ast.MapLiteral:
        self.expect_symbol("{")
        entries = []
        if not self.at_symbol("}"):
            while True:
                key = self.symbolic_name("as map key")
                self.expect_symbol(":", "after map key")
                entries.append((key, self.expression()))
                if not self.accept_symbol(","):
                    break
        if not self.at_symbol("}"):
            raise self.error("expected '}' to close map", {"}", ","})
        self.next()
        return ast.MapLiteral(entries)

    def case_expr(self) -> ast.CaseExpr:
        self.expect_keyword("CASE")
        subject = None if self.at_keyword("WHEN") else self.expression()
        branches = []
        while self.accept_keyword("WHEN"):
            cond = self.expression()
            self.expect_keyword("THEN", "in CASE")
            branches.append((cond, self.expression()))
        if not branches:
            raise self.error("expected WHEN in CASE", {"WHEN"})
        default = self.expression() if self.accept_keyword("ELSE") else None
        self.expect_keyword("END", "to close CASE")
        return ast.CaseExpr(subject, branches, default)


def parse(text: str | bytes) -> ast.CypherAst:
    """Parse a full query; raises CypherSyntaxError on the first problem."""
    try:
        tokens = tokenize(text)
    except LexError as exc:
        raise CypherSyntaxError(lex_diagnostic(exc)) from None
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8")
    parser = _Parser(text, tokens)
    try:
        return parser.query()
    except RecursionError:
        raise parser.error("expression nested too deeply") from None


def formal_validate(text: str | bytes) -> SyntaxVerdict:
    try:
        parse(text)
    except CypherSyntaxError as exc:
        return exc.verdict
    return SyntaxVerdict.ok()
