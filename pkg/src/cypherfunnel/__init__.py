"""Filter, vote on and evaluate sampled Cypher candidates for text-to-Cypher."""

from .confidence import (
    OnlineResult,
    TraceConfidence,
    calibrate_threshold,
    group_confidences,
    offline_filter,
    online_simulate,
    token_confidence,
    trace_confidence,
)
from .cypher import formal_validate, naive_validate, parse, validate
from .evaluation import EvalReport, EvalRow, aggregate, evaluate_question, rouge_l, rouge_tokenize
from .executor import ExecutionOutcome, MicroEngine, MicroGraph, execute_micro
from .pipeline import ConfigError, QuestionResult, RunReport, process_question, run_pipeline
from .schema import GraphSchema, SchemaTriple, parse_schema, schema_validate
from .synth import SynthConfig, default_gold_pool, default_graph, default_schema_text, generate, mutate
from .traces import (
    CandidateTrace,
    DatasetError,
    FunnelRecord,
    PipelineConfig,
    QuestionRecord,
    TokenStep,
    load_dataset,
    postprocess_raw,
    save_dataset,
)
from .voting import EMPTY, Candidate, Prediction, vote, vote_key

__version__ = "0.1.0"

__all__ = [
    "Candidate",
    "CandidateTrace",
    "ConfigError",
    "DatasetError",
    "EMPTY",
    "EvalReport",
    "EvalRow",
    "ExecutionOutcome",
    "FunnelRecord",
    "GraphSchema",
    "MicroEngine",
    "MicroGraph",
    "OnlineResult",
    "PipelineConfig",
    "Prediction",
    "QuestionRecord",
    "QuestionResult",
    "RunReport",
    "SchemaTriple",
    "SynthConfig",
    "TokenStep",
    "TraceConfidence",
    "aggregate",
    "calibrate_threshold",
    "default_gold_pool",
    "default_graph",
    "default_schema_text",
    "evaluate_question",
    "execute_micro",
    "formal_validate",
    "generate",
    "group_confidences",
    "load_dataset",
    "mutate",
    "naive_validate",
    "offline_filter",
    "online_simulate",
    "parse",
    "parse_schema",
    "postprocess_raw",
    "process_question",
    "rouge_l",
    "rouge_tokenize",
    "run_pipeline",
    "save_dataset",
    "schema_validate",
    "token_confidence",
    "trace_confidence",
    "validate",
    "vote",
    "vote_key",
]
