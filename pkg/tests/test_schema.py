import itertools
import random
from pathlib import Path

import pytest

from cypherfunnel.cypher import parse
from cypherfunnel.schema import (
    GraphSchema,
    RelUsage,
    SchemaError,
    SchemaTriple,
    check_usage,
    extract_usages,
    parse_schema,
    scan_usages,
    schema_filter,
    schema_validate,
)
from cypherfunnel.synth import default_gold_pool, default_schema_text

from oracles import mirror_query, schema_ok

DATA = Path(__file__).parent / "data"
VALID = [q for q in (DATA / "valid_queries.txt").read_text().splitlines() if q.strip()]
ACTED = GraphSchema.of([("Person", "ACTED_IN", "Movie")])


def usage(src, rel, tgt, directed=True):
    return RelUsage(frozenset(src), frozenset([rel]), frozenset(tgt), directed)


def plain(us):
    return [(u.source_labels, u.rel_types, u.target_labels, u.directed) for u in us]


def verdict(query, schema, **kw):
    return schema_validate(extract_usages(parse(query)), schema, **kw)


class TestParseSchema:
    def test_single(self):
        assert parse_schema("(:Person)-[:ACTED_IN]->(:Movie)").triples == {
            SchemaTriple("Person", "ACTED_IN", "Movie")}

    def test_duplicates_collapse(self):
        text = "(:A)-[:R]->(:B)\n(:A)-[:R]->(:B)"
        assert len(parse_schema(text).triples) == 1

    def test_junk_line_warns(self):
        schema = parse_schema("(:A)-[:R]->(:B)\ngarbage")
        assert len(schema.triples) == 1 and len(schema.warnings) == 1

    def test_whitespace_and_backticks(self):
        schema = parse_schema("  ( : `Odd Label` ) - [ :R ] -> ( :B ) ")
        assert schema.triples == {SchemaTriple("Odd Label", "R", "B")}

    def test_json_list(self):
        schema = parse_schema('[{"source": "A", "type": "R", "target": "B"}]')
        assert schema.triples == {SchemaTriple("A", "R", "B")}

    def test_nothing_parsable(self):
        with pytest.raises(SchemaError):
            parse_schema("nothing here")

    def test_index_is_projection(self):
        schema = parse_schema(default_schema_text())
        rebuilt = {}
        for t in schema.triples:
            rebuilt.setdefault(t.rel_type, set()).add((t.source_label, t.target_label))
        assert {k: set(v) for k, v in schema.rel_type_index.items()} == rebuilt

    def test_empty_triple_field(self):
        with pytest.raises(ValueError):
            SchemaTriple("A", "", "B")


class TestExtract:
    def test_direct(self):
        us = extract_usages(parse("MATCH (p:Person)-[:ACTED_IN]->(m:Movie) RETURN p"))
        assert plain(us) == plain([usage({"Person"}, "ACTED_IN", {"Movie"})])

    def test_left_is_canonicalized(self):
        (u,) = extract_usages(parse("MATCH (m:Movie)<-[:ACTED_IN]-(p:Person) RETURN p"))
        assert (u.source_labels, u.target_labels, u.directed) == ({"Person"}, {"Movie"}, True)

    def test_undirected(self):
        (u,) = extract_usages(parse("MATCH (a)-[:R]-(b) RETURN a"))
        assert not u.directed and u.source_labels == frozenset()

    def test_alternation(self):
        (u,) = extract_usages(parse("MATCH (a)-[:R|S]->(b) RETURN a"))
        assert u.rel_types == {"R", "S"}

    def test_scan_matches_ast_on_explicit_shapes(self):
        q = "MATCH (a:A)-[:R]->(b:B)<-[r:S {w: 1}]-(c:C) RETURN a"
        assert plain(scan_usages(q)) == plain(extract_usages(parse(q)))

    def test_scan_on_unparsable_text(self):
        us = scan_usages("MATCH (m:Movie)-[:ACTED_IN]->(p:Person) RETURN RETURN p")
        assert plain(us) == plain([usage({"Movie"}, "ACTED_IN", {"Person"})])


class TestValidate:
    def test_opposite_direction(self):
        v = schema_validate([usage({"Movie"}, "ACTED_IN", {"Person"})], ACTED)
        assert not v.accepted and "opposite direction" in v.message

    def test_exact(self):
        assert schema_validate([usage({"Person"}, "ACTED_IN", {"Movie"})], ACTED).accepted

    def test_wildcard_source(self):
        assert schema_validate([usage(set(), "ACTED_IN", {"Movie"})], ACTED).accepted

    def test_unknown_type(self):
        u = usage({"Movie"}, "LIKES", {"Person"})
        assert schema_validate([u], ACTED).accepted
        assert not schema_validate([u], ACTED, strict=True).accepted

    def test_undirected_passes(self):
        assert schema_validate([usage({"Movie"}, "ACTED_IN", {"Person"}, False)], ACTED).accepted

    def test_no_usages(self):
        assert schema_validate([], ACTED).accepted

    def test_label_mismatch_modes(self):
        u = usage({"Genre"}, "ACTED_IN", {"Genre"})
        assert not schema_validate([u], ACTED).accepted
        assert schema_validate([u], ACTED, label_mode="direction-only").accepted
        flipped = usage({"Movie"}, "ACTED_IN", {"Person"})
        assert not schema_validate([flipped], ACTED, label_mode="direction-only").accepted

    def test_every_alternative_checked(self):
        schema = GraphSchema.of([("A", "R", "B"), ("A", "S", "B")])
        u = RelUsage(frozenset({"A"}), frozenset({"R", "S"}), frozenset({"B"}), True)
        assert schema_validate([u], schema).accepted
        schema2 = GraphSchema.of([("A", "R", "B"), ("B", "S", "A")])
        assert not schema_validate([u], schema2).accepted

    def test_label_subset_enumeration_oracle(self):
        schema = GraphSchema.of([("A", "R", "B"), ("B", "R", "C"), ("C", "S", "C"), ("A", "S", "A")])
        triples = {(t.source_label, t.rel_type, t.target_label) for t in schema.triples}
        labels = ["A", "B", "C", "D"]
        subsets = [frozenset(c) for n in range(3) for c in itertools.combinations(labels, n)]
        for src, tgt, rel in itertools.product(subsets, subsets, ["R", "S"]):
            got = check_usage(RelUsage(src, frozenset([rel]), tgt, True), schema) is None
            assert got == schema_ok(src, rel, tgt, triples), (src, rel, tgt)


class TestFilter:
    def test_one_flipped(self):
        cands = [("a", "MATCH (p:Person)-[:ACTED_IN]->(m:Movie) RETURN p"),
                 ("b", "MATCH (m:Movie)-[:ACTED_IN]->(p:Person) RETURN p"),
                 ("c", "MATCH (m:Movie)<-[:ACTED_IN]-(p:Person) RETURN p")]
        out = schema_filter(cands, ACTED)
        assert out.survivors == [0, 2]
        assert out.records[0].trace_id == "b" and "ACTED_IN" in out.records[0].reason

    def test_no_relationships(self):
        cands = [("a", "MATCH (n) RETURN n"), ("b", "RETURN 1")]
        assert schema_filter(cands, ACTED).survivors == [0, 1]

    def test_disabled(self):
        cands = [("b", "MATCH (m:Movie)-[:ACTED_IN]->(p:Person) RETURN p")]
        assert schema_filter(cands, None, enabled=False).survivors == [0]


def _fixture_schema_plus_corpus_types():
    extra = [("Person", "KNOWS", "Person"), ("A", "Where", "B"), ("Return", "Where", "Match"),
             ("Person", "T", "Movie"), ("Person", "U", "Genre")]
    return parse_schema(default_schema_text()).with_triples(SchemaTriple(*t) for t in extra)


class TestProperties:
    def test_mirror_invariance_on_corpora(self):
        schema = _fixture_schema_plus_corpus_types()
        queries = VALID + [g.gold_query for g in default_gold_pool()]
        for q in queries:
            m = mirror_query(q)
            for mode in ("label-aware", "direction-only"):
                assert verdict(q, schema, label_mode=mode).accepted == \
                    verdict(m, schema, label_mode=mode).accepted, (q, m)

    def test_monotonic_when_adding_triples(self):
        rng = random.Random(3)
        labels, types = ["A", "B", "C"], ["R", "S"]
        universe = [SchemaTriple(s, r, t) for s in labels for r in types for t in labels]
        for _ in range(300):
            base = GraphSchema.of(rng.sample(universe, rng.randint(1, 6)))
            known = [t for t in universe if t.rel_type in base.rel_type_index]
            bigger = base.with_triples(rng.sample(known, rng.randint(1, len(known))))
            src = frozenset(rng.sample(labels, rng.randint(0, 2)))
            tgt = frozenset(rng.sample(labels, rng.randint(0, 2)))
            u = RelUsage(src, frozenset([rng.choice(types)]), tgt, True)
            if schema_validate([u], base).accepted:
                assert schema_validate([u], bigger).accepted

    def test_direction_only_is_not_monotonic(self):
        # an unrelated triple can make the mirrored reading compatible
        u = usage(set(), "S", {"A"})
        base = GraphSchema.of([("B", "S", "C")])
        assert schema_validate([u], base, label_mode="direction-only").accepted
        bigger = base.with_triples([SchemaTriple("A", "S", "C")])
        assert not schema_validate([u], bigger, label_mode="direction-only").accepted

    def test_zero_directed_usages_accepted(self):
        schema = parse_schema(default_schema_text())
        for q in ["MATCH (m:Movie)-[:ACTED_IN]-(p:Person) RETURN p", "MATCH (n) RETURN n"]:
            assert verdict(q, schema, strict=True).accepted
