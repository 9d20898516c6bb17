import json

import pytest
from hypothesis import given, settings, strategies as st

from cypherfunnel.traces import (
    CandidateTrace,
    DatasetError,
    PipelineConfig,
    QuestionRecord,
    SamplingProfile,
    TokenStep,
    dumps_dataset,
    load_dataset,
    parse_dataset_lines,
    postprocess_raw,
    record_to_json,
)


def _record(qid="q1", **overrides):
    obj = {
        "question_id": qid,
        "question": "Who acted in Heat?",
        "gold_query": "MATCH (p:Person)-[:ACTED_IN]->(m:Movie) RETURN p.name",
        "schema": "(:Person)-[:ACTED_IN]->(:Movie)",
        "traces": [{"trace_id": "t0", "text": "MATCH (n) RETURN n",
                    "tokens": [{"topk_logprobs": [-0.1, -2.0]}]}],
    }
    obj.update(overrides)
    return obj


class TestTokenStep:
    def test_valid(self):
        assert TokenStep((0.0, -1.0, -1.0)).topk_logprobs == (0.0, -1.0, -1.0)

    @pytest.mark.parametrize("values", [(), (0.5,), (-1.0, -0.5), (float("nan"),), (float("-inf"),)])
    def test_invalid(self, values):
        with pytest.raises(ValueError):
            TokenStep(values)


def test_empty_tokens_only_with_empty_text():
    CandidateTrace("t", "", ())
    with pytest.raises(ValueError):
        CandidateTrace("t", "MATCH (n) RETURN n", ())


def test_sampling_profiles():
    assert SamplingProfile("moderately-diverse").top_k == 60
    very = SamplingProfile.named("very-diverse")
    assert (very.temperature, very.top_p, very.top_k) == (1.2, 0.999, 80)
    with pytest.raises(ValueError):
        SamplingProfile("very-diverse", 0.5, 0.5, 5)
    SamplingProfile("custom", 0.7, None, 10)


def test_pipeline_config_validation():
    PipelineConfig()
    for bad in ({"inference_mode": "turbo"}, {"keep_ratio": 0.0}, {"keep_ratio": 1.5},
                {"window": 0}, {"vote_mode": "x"}, {"grammar_variant": "antlr"}):
        with pytest.raises(ValueError):
            PipelineConfig(**bad)


class TestLoadDataset:
    def test_single_record(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text(json.dumps(_record()) + "\n")
        records = load_dataset(path)
        assert len(records) == 1
        assert records[0].traces[0].tokens[0].topk_logprobs == (-0.1, -2.0)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text("")
        assert load_dataset(path) == []

    def test_missing_gold_query_names_field_and_line(self, tmp_path):
        obj = _record()
        del obj["gold_query"]
        path = tmp_path / "d.jsonl"
        path.write_text(json.dumps(obj) + "\n")
        with pytest.raises(DatasetError, match=r"line 1.*gold_query"):
            load_dataset(path)

    def test_bad_json_reports_line_and_offset(self):
        lines = [json.dumps(_record("a")) + "\n", '{"question_id": \n']
        with pytest.raises(DatasetError, match=r"line 2: invalid JSON at byte offset \d+"):
            parse_dataset_lines(lines)

    def test_non_finite_rejected(self):
        line = json.dumps(_record()).replace("-2.0", "NaN")
        with pytest.raises(DatasetError, match="non-finite"):
            parse_dataset_lines([line])

    def test_duplicate_ids(self):
        lines = [json.dumps(_record("a")), json.dumps(_record("a"))]
        with pytest.raises(DatasetError, match="duplicate"):
            parse_dataset_lines(lines)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetError):
            load_dataset(tmp_path / "absent.jsonl")

    def test_schema_as_triple_list(self):
        obj = _record(schema=[{"source": "Person", "type": "ACTED_IN", "target": "Movie"}])
        (rec,) = parse_dataset_lines([json.dumps(obj)])
        assert rec.schema_text == "(:Person)-[:ACTED_IN]->(:Movie)"


_logprobs = st.lists(st.floats(-20, 0, allow_nan=False), min_size=1, max_size=6).map(
    lambda xs: sorted(xs, reverse=True))
_trace = st.builds(
    lambda i, text, steps: CandidateTrace(f"t{i}", text, tuple(TokenStep(tuple(s)) for s in steps)),
    st.integers(0, 99), st.text(min_size=1, max_size=30), st.lists(_logprobs, min_size=1, max_size=5),
)


@settings(max_examples=60, deadline=None)
@given(st.lists(_trace, max_size=4, unique_by=lambda t: t.trace_id), st.text(max_size=20))
def test_round_trip(traces, question):
    rec = QuestionRecord("q", question, "RETURN 1", "(:A)-[:R]->(:B)", tuple(traces))
    (back,) = parse_dataset_lines(line + "\n" for line in dumps_dataset([rec]).split("\n") if line)
    assert back == rec
    assert record_to_json(back) == record_to_json(rec)


class TestPostprocess:
    @pytest.mark.parametrize("raw, clean", [
        ("cypher: MATCH (n) RETURN n", "MATCH (n) RETURN n"),
        ("MATCH (n) RETURN n", "MATCH (n) RETURN n"),
        ("```cypher\nMATCH  (n)\nRETURN n;\n```", "MATCH (n) RETURN n"),
        ("CYPHER:\tMATCH (n) RETURN n ;;", "MATCH (n) RETURN n"),
        ("cypher\nMATCH (n) RETURN n", "MATCH (n) RETURN n"),
        ("```\nRETURN 1\n```", "RETURN 1"),
        ("  RETURN   'a  b'  ", "RETURN 'a  b'"),
        ("RETURN `x  y`,\n\n\"p\\\"  q\"", "RETURN `x  y`, \"p\\\"  q\""),
        ("", ""),
    ])
    def test_examples(self, raw, clean):
        assert postprocess_raw(raw) == clean

    def test_line_comment_keeps_its_newline(self):
        out = postprocess_raw("MATCH (n) // pick all\n   RETURN n")
        assert out == "MATCH (n) // pick all\nRETURN n"

    @settings(max_examples=300, deadline=None)
    @given(st.text(alphabet=st.sampled_from(list("ab ;:`'\"\\\n\t/c{}")), max_size=60) | st.text(max_size=60))
    def test_idempotent(self, raw):
        once = postprocess_raw(raw)
        assert postprocess_raw(once) == once

    @settings(max_examples=200, deadline=None)
    @given(st.text(alphabet=st.sampled_from(list("ab  \t\nx")), max_size=20))
    def test_quoted_content_preserved(self, inner):
        for q in "'\"`":
            body = inner.replace(q, "")
            raw = f"RETURN   {q}{body}{q}  AS   v"
            assert f"{q}{body}{q}" in postprocess_raw(raw)

    def test_large_input(self):
        raw = "MATCH (n)   RETURN n  " * 3000
        once = postprocess_raw(raw[: 64 * 1024])
        assert postprocess_raw(once) == once
