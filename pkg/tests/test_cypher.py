from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from cypherfunnel.cypher import (
    CypherSyntaxError,
    LexError,
    formal_validate,
    grammar_filter,
    naive_validate,
    parse,
    tokenize,
    validate,
)
from cypherfunnel.cypher import ast
from cypherfunnel.cypher.naive import brackets_balanced

DATA = Path(__file__).parent / "data"
VALID = [q for q in (DATA / "valid_queries.txt").read_text().splitlines() if q.strip()]
INVALID = [q for q in (DATA / "invalid_queries.txt").read_text().splitlines() if q.strip()]


def _kinds(text):
    return [(t.kind, t.text) for t in tokenize(text)]


def _balanced_oracle(text):
    """Independent bracket-stack check over lexed symbol tokens."""
    pairs = {")": "(", "]": "[", "}": "{"}
    stack = []
    for tok in tokenize(text):
        if tok.kind != "symbol":
            continue
        if tok.text in "([{":
            stack.append(tok.text)
        elif tok.text in pairs:
            if not stack or stack.pop() != pairs[tok.text]:
                return False
    return not stack


class TestLexer:
    def test_minimal(self):
        assert _kinds("MATCH (n)") == [("keyword", "MATCH"), ("symbol", "("),
                                       ("identifier", "n"), ("symbol", ")")]

    def test_string_hides_paren(self):
        assert _kinds("RETURN 'a)b'") == [("keyword", "RETURN"), ("string", "'a)b'")]

    def test_comments_skipped(self):
        assert _kinds("MATCH /* c */ (n)") == _kinds("MATCH (n)")
        assert _kinds("MATCH // c\n(n)") == _kinds("MATCH (n)")

    def test_keywords_case_insensitive(self):
        toks = tokenize("match (n) ReTuRn n")
        assert toks[0].is_keyword("MATCH") and toks[4].upper == "RETURN"

    def test_positions(self):
        toks = tokenize("MATCH\n  (n)")
        assert (toks[1].offset, toks[1].line, toks[1].column) == (8, 2, 3)

    @pytest.mark.parametrize("text", ["RETURN 'abc", 'RETURN "a\\"', "MATCH (`x) RETURN 1",
                                      "RETURN 1 /* open"])
    def test_unterminated(self, text):
        with pytest.raises(LexError) as info:
            tokenize(text)
        assert info.value.offset >= 0

    def test_operators(self):
        texts = [t.text for t in tokenize("a<>b<=c>=d=~e+=f..g")]
        assert texts == ["a", "<>", "b", "<=", "c", ">=", "d", "=~", "e", "+=", "f", "..", "g"]


class TestNaive:
    def test_examples(self):
        assert not naive_validate("RETURN RETURN 1").accepted
        assert naive_validate("MATCH (n) RETURN n").accepted
        verdict = naive_validate("MATCH (n RETURN n")
        assert not verdict.accepted
        assert verdict.diagnostics[0].offset == 6

    def test_needs_a_main_clause(self):
        assert not naive_validate("UNWIND [1] AS x").accepted
        assert naive_validate("WITH 1 AS x RETURN x").accepted

    def test_repeat_inside_string_is_fine(self):
        assert naive_validate("RETURN 'RETURN RETURN'").accepted

    def test_repeat_across_comment(self):
        assert not naive_validate("MATCH /* x */ MATCH (n) RETURN n").accepted

    def test_lenient_on_structure(self):
        # naive rules say nothing about clause order
        assert naive_validate("RETURN n MATCH (n)").accepted
        assert not formal_validate("RETURN n MATCH (n)").accepted


class TestParser:
    def test_example_ordering(self):
        tree = parse("MATCH (p:Person)-[:ACTED_IN]->(m:Movie) RETURN m.title ORDER BY m.title SKIP 1 LIMIT 2")
        match, ret = tree.statements[0].clauses
        assert isinstance(match, ast.Match) and isinstance(ret, ast.Return)
        assert ret.projection.skip == ast.Literal(1, "integer")
        ((a, rel, b),) = list(tree.relationships())
        assert (a.labels, rel.types, rel.direction, b.labels) == (["Person"], ["ACTED_IN"], "right", ["Movie"])

    def test_truncated_return(self):
        verdict = formal_validate("MATCH (n) RETURN")
        assert not verdict.accepted
        assert "after RETURN" in verdict.diagnostics[0].message

    def test_var_length_undirected(self):
        tree = parse("MATCH (a)-[:R*1..3]-(b) WHERE a.x IS NOT NULL RETURN count(*)")
        ((_, rel, _),) = list(tree.relationships())
        assert rel.direction == "undirected" and rel.length == (1, 3)

    def test_left_arrow(self):
        ((_, rel, _),) = list(parse("MATCH (a)<-[:R]-(b) RETURN a").relationships())
        assert rel.direction == "left"

    def test_precedence(self):
        tree = parse("RETURN 1 + 2 * 3 ^ 2 OR NOT a AND b")
        expr = tree.statements[0].clauses[0].projection.items[0].expression
        assert isinstance(expr, ast.BinaryOp) and expr.op == "OR"
        left = expr.left
        assert left.op == "+" and left.right.op == "*" and left.right.right.op == "^"
        assert expr.right.op == "AND" and isinstance(expr.right.left, ast.UnaryOp)

    def test_diagnostic_lists_expected(self):
        with pytest.raises(CypherSyntaxError) as info:
            parse("MATCH (n:Person RETURN n")
        assert ")" in info.value.expected
        assert "expected one of" in str(info.value.diagnostic)

    def test_updating_end_allowed(self):
        assert formal_validate("MERGE (n:Person {name: 'a'})").accepted
        assert not formal_validate("MATCH (n) WITH n").accepted

    def test_union(self):
        tree = parse("RETURN 1 AS x UNION ALL RETURN 2 AS x UNION RETURN 3 AS x")
        assert tree.union_all == [True, False]

    def test_keyword_not_a_variable(self):
        assert not formal_validate("MATCH (return) RETURN 1").accepted
        assert formal_validate("MATCH (n:Return {limit: 1}) RETURN n.match").accepted


class TestCorpus:
    def test_sizes(self):
        assert len(VALID) >= 30 and len(INVALID) >= 30

    @pytest.mark.parametrize("query", VALID)
    def test_valid(self, query):
        parse(query)

    @pytest.mark.parametrize("query", INVALID)
    def test_invalid(self, query):
        verdict = formal_validate(query)
        assert not verdict.accepted
        d = verdict.diagnostics[0]
        assert 0 <= d.offset <= len(query.encode()) and d.line >= 1 and d.column >= 1

    def test_includes_duplicate_return(self):
        assert "RETURN RETURN 1" in INVALID


class TestGrammarFilter:
    def test_naive_example(self):
        out = grammar_filter([("a", "MATCH (n) RETURN n"), ("b", "RETURN RETURN 1")], "naive")
        assert out.survivors == [0]
        assert out.records[0].trace_id == "b" and out.records[0].removed_at == "grammar"

    def test_all_valid_identity(self):
        cands = [(str(i), q) for i, q in enumerate(VALID[:5])]
        assert grammar_filter(cands, "formal").survivors == list(range(5))

    def test_all_invalid(self):
        cands = [("a", "MATCH (n RETURN n"), ("b", "MATCH (n) RETURN"), ("c", "RETURN RETURN 1")]
        out = grammar_filter(cands, "formal")
        assert out.survivors == [] and len(out.records) == 3
        assert all(r.reason for r in out.records)

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            validate("RETURN 1", "antlr")


_alphabet = st.sampled_from(list("()[]{}'\"`-<>:;,.*|$ \n") + ["MATCH", "RETURN", "n", "1", "WHERE", "/*", "//"])


class TestProperties:
    @settings(max_examples=500, deadline=None)
    @given(st.lists(_alphabet, max_size=40).map("".join))
    def test_total_and_sound(self, text):
        for variant in ("naive", "formal"):
            verdict = validate(text, variant)
            if verdict.accepted:
                assert _balanced_oracle(text)
                assert brackets_balanced(text)
        assert formal_validate(text) == formal_validate(text)

    @settings(max_examples=200, deadline=None)
    @given(st.binary(max_size=64))
    def test_arbitrary_bytes(self, raw):
        naive_validate(raw)
        formal_validate(raw)

    def test_invalid_utf8(self):
        for fn in (naive_validate, formal_validate):
            verdict = fn(b"MATCH (n) RETURN \xff")
            assert not verdict.accepted and "UTF-8" in verdict.diagnostics[0].message

    def test_oversize_and_deep_nesting(self):
        assert not formal_validate("x" * 70000).accepted
        assert not naive_validate("(" * 60000).accepted
        assert not formal_validate("RETURN " + "(" * 20000 + "1" + ")" * 20000).accepted
        assert not formal_validate("RETURN " + "-" * 50000 + "1").accepted

    def test_bytes_match_text(self):
        for q in VALID[:10]:
            assert formal_validate(q.encode()) == formal_validate(q)

    def test_string_locality(self):
        checked = 0
        for query in VALID:
            for tok in tokenize(query):
                if tok.kind != "string":
                    continue
                for cut in range(1, len(tok.text)):
                    if tok.text[cut - 1] == "\\":
                        continue
                    pos = tok.offset + cut
                    for ch in "()[]{}":
                        mutant = query[:pos] + ch + query[pos:]
                        assert formal_validate(mutant).accepted, mutant
                        assert naive_validate(mutant).accepted == naive_validate(query).accepted
                        checked += 1
        assert checked > 100
