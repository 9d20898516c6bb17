
import pytest

from cypherfunnel.evaluation import EMPTY
from cypherfunnel.executor import MicroEngine, SUCCESS
from cypherfunnel.pipeline import ConfigError, STAGE_NAMES, run_pipeline
from cypherfunnel.synth import SynthConfig, default_gold_pool, default_graph, generate
from cypherfunnel.traces import CandidateTrace, PipelineConfig, QuestionRecord, TokenStep

GOLDS = default_gold_pool()
GRAPH = default_graph()
ENGINE = MicroEngine(GRAPH)
CONFIGS = [PipelineConfig(m, g, s) for m in ("base", "offline", "online")
           for g in ("none", "naive", "formal") for s in (False, True)]


@pytest.fixture(scope="module")
def dataset():
    return generate(GOLDS, GRAPH, SynthConfig(n_questions=20, n_traces=10, seed=7))


def _trace(tid, text, conf=2.0, n=4):
    return CandidateTrace(tid, text, tuple(TokenStep((-conf,)) for _ in range(n)))


def test_single_trace_passthrough():
    gold = GOLDS[0].gold_query
    rec = QuestionRecord("q", "?", gold, "(:Person)-[:ACTED_IN]->(:Movie)", (_trace("t", gold),))
    report = run_pipeline([rec], PipelineConfig(), ENGINE)
    q = report.questions[0]
    assert q.prediction.query == gold and q.row.outcome_class == SUCCESS


def test_flip_only_is_empty():
    gold = "MATCH (p:Person)-[:ACTED_IN]->(m:Movie) RETURN p.name"
    flipped = "MATCH (p:Person)<-[:ACTED_IN]-(m:Movie) RETURN p.name"
    rec = QuestionRecord("q", "?", gold, "(:Person)-[:ACTED_IN]->(:Movie)",
                         tuple(_trace(f"t{i}", flipped, 2 + i / 10) for i in range(5)))
    report = run_pipeline([rec], PipelineConfig("offline", "formal", True), ENGINE)
    q = report.questions[0]
    assert q.prediction.is_empty and q.row.outcome_class == EMPTY
    assert q.stage_counts["schema"] == 0


def test_online_needs_two_traces():
    rec = QuestionRecord("q", "?", "RETURN 1", "(:A)-[:R]->(:B)", (_trace("t", "RETURN 1"),))
    with pytest.raises(ConfigError):
        run_pipeline([rec], PipelineConfig("online"), ENGINE)


def test_schema_required_when_filter_on():
    rec = QuestionRecord("q", "?", "RETURN 1", "no schema here", (_trace("t", "RETURN 1"),))
    with pytest.raises(ConfigError):
        run_pipeline([rec], PipelineConfig(schema_filter=True), ENGINE)


def test_online_terminates_and_saves_tokens():
    traces = [_trace("w", "RETURN 1", 3.0, 8)]
    traces += [_trace(f"t{i}", "RETURN 2", 0.5, 8) for i in range(9)]
    rec = QuestionRecord("q", "?", "RETURN 1", "(:A)-[:R]->(:B)", tuple(traces))
    report = run_pipeline([rec], PipelineConfig("online", window=4))
    q = report.questions[0]
    assert q.stage_counts["confidence"] == 1 and q.prediction.query == "RETURN 1"
    assert q.threshold == 3.0
    assert report.tokens_saved == 9 * (8 - 4)


def test_funnel_records_cover_every_trace(dataset):
    report = run_pipeline(dataset, PipelineConfig("offline", "formal", True), ENGINE)
    for rec, q in zip(dataset, report.questions):
        assert [f.trace_id for f in q.funnel] == [t.trace_id for t in rec.traces]
        survived = sum(f.removed_at == "survived" for f in q.funnel)
        assert survived == q.stage_counts["schema"]
        assert all(f.reason for f in q.funnel if f.removed_at != "survived")


def test_stage_counts_non_increasing(dataset):
    for cfg in CONFIGS:
        for q in run_pipeline(dataset, cfg).questions:
            counts = [q.stage_counts[s] for s in STAGE_NAMES]
            assert counts == sorted(counts, reverse=True)


def test_determinism_and_workers(dataset):
    cfg = PipelineConfig("online", "formal", True)
    first = run_pipeline(dataset, cfg, ENGINE).to_json()
    assert run_pipeline(dataset, cfg, ENGINE).to_json() == first
    assert run_pipeline(dataset, cfg, ENGINE, workers=4).to_json() == first


def test_empty_count_monotone_across_stages(dataset):
    def empties(cfg):
        return run_pipeline(dataset, cfg, ENGINE).evaluation.counts[EMPTY]

    for mode in ("base", "offline", "online"):
        for variant in ("naive", "formal"):
            plain = empties(PipelineConfig(mode, "none", False))
            grammar = empties(PipelineConfig(mode, variant, False))
            both = empties(PipelineConfig(mode, variant, True))
            assert plain <= grammar <= both
        assert empties(PipelineConfig(mode, "none", False)) <= empties(PipelineConfig(mode, "none", True))


def test_report_shape(dataset):
    data = run_pipeline(dataset[:2], PipelineConfig("offline"), ENGINE).as_dict()
    assert data["report_version"] == 1
    assert set(data) == {"report_version", "config", "evaluation", "stage_totals",
                         "tokens_saved", "questions"}
    assert data["config"]["inference_mode"] == "offline"


def test_gold_failure_excluded():
    rec = QuestionRecord("q", "?", "MATCH (n RETURN n", "(:A)-[:R]->(:B)", (_trace("t", "RETURN 1"),))
    report = run_pipeline([rec], PipelineConfig(), ENGINE)
    assert report.evaluation.total == 0 and report.evaluation.excluded[0]["question_id"] == "q"


def test_empty_generation_trace():
    traces = (_trace("a", "RETURN 1"), CandidateTrace("b", "", ()), _trace("c", "RETURN 1"))
    rec = QuestionRecord("q", "?", "RETURN 1", "(:A)-[:R]->(:B)", traces)
    for mode in ("base", "offline", "online"):
        q = run_pipeline([rec], PipelineConfig(mode, "formal")).questions[0]
        assert q.prediction.query == "RETURN 1"
