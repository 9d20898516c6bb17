"""Query execution backends for execution-based evaluation."""

from .graph import GraphFixtureError, MicroGraph
from .micro import (
    RUNTIME_ERROR,
    SUCCESS,
    SYNTAX_ERROR,
    ExecutionOutcome,
    MicroEngine,
    execute_micro,
)

__all__ = [
    "GraphFixtureError", "MicroGraph", "RUNTIME_ERROR", "SUCCESS", "SYNTAX_ERROR",
    "ExecutionOutcome", "MicroEngine", "execute_micro",
]

from .http import HttpBackend, HttpConfig, execute_http  # noqa: E402

__all__ += ["HttpBackend", "HttpConfig", "execute_http"]
