"""Execute queries against a remote transactional HTTP endpoint."""

from __future__ import annotations

import base64
import json
import os
import socket
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

from .micro import RUNTIME_ERROR, SUCCESS, SYNTAX_ERROR, ExecutionOutcome

ENV_URL = "CYPHERFUNNEL_HTTP_URL"
ENV_TOKEN = "CYPHERFUNNEL_HTTP_TOKEN"
ENV_TIMEOUT = "CYPHERFUNNEL_HTTP_TIMEOUT"


@dataclass
class HttpConfig:
    url: str
    token: Optional[str] = None
    timeout: float = 30.0
    max_in_flight: int = 4
    _gate: threading.BoundedSemaphore = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.url:
            raise ValueError("HTTP endpoint URL is required")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be at least 1")
        self._gate = threading.BoundedSemaphore(self.max_in_flight)

    @classmethod
    def from_env(cls, environ: Mapping[str, str] = os.environ, **overrides: Any) -> "HttpConfig":
        url = overrides.pop("url", None) or environ.get(ENV_URL, "")
        token = overrides.pop("token", None) or environ.get(ENV_TOKEN) or None
        timeout = overrides.pop("timeout", None) or float(environ.get(ENV_TIMEOUT, 30.0))
        return cls(url=url, token=token, timeout=timeout, **overrides)

    def headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json", "Accept": "application/json"}
        if self.token:
            if ":" in self.token:
                encoded = base64.b64encode(self.token.encode("utf-8")).decode("ascii")
                headers["Authorization"] = f"Basic {encoded}"
            else:
                headers["Authorization"] = f"Bearer {self.token}"
        return headers


def _classify_errors(errors: list) -> Optional[ExecutionOutcome]:
    if not errors:
        return None
    entries = [e if isinstance(e, dict) else {"message": str(e)} for e in errors]
    syntax = any(
        "SyntaxError" in str(e.get("code", "")) or "SyntaxError" in str(e.get("classification", ""))
        for e in entries
    )
    first = entries[0]
    message = str(first.get("message") or first.get("code") or "query failed")
    return ExecutionOutcome(SYNTAX_ERROR if syntax else RUNTIME_ERROR, message=message)


def _errors_of(payload: Any) -> list:
    if not isinstance(payload, dict):
        return []
    if payload.get("errors"):
        return list(payload["errors"])
    # some servers answer with a bare {"code": ..., "message": ...} object
    if "code" in payload and "results" not in payload:
        return [payload]
    return []


def _rows_from(payload: dict) -> tuple[tuple[Any, ...], tuple[tuple[Any, ...], ...]]:
    results = payload.get("results") or []
    if not results:
        return (), ()
    first = results[0]
    columns = tuple(first.get("columns", []))
    rows = tuple(tuple(entry.get("row", [])) for entry in first.get("data", []))
    return columns, rows


def execute_http(config: HttpConfig, query: str) -> ExecutionOutcome:
    """POST one statement and map the response onto the outcome taxonomy."""
    body = json.dumps({"statements": [{"statement": query}]}).encode("utf-8")
    request = urllib.request.Request(config.url, data=body, headers=config.headers(), method="POST")
    with config._gate:
        try:
            with urllib.request.urlopen(request, timeout=config.timeout) as response:
                raw = response.read()
        except urllib.error.HTTPError as exc:
            raw = exc.read()
            try:
                payload = json.loads(raw or b"{}")
            except json.JSONDecodeError:
                return ExecutionOutcome(RUNTIME_ERROR, message=f"HTTP {exc.code}: {exc.reason}")
            return _classify_errors(_errors_of(payload) or [{"message": f"HTTP {exc.code}"}])
        except (urllib.error.URLError, socket.timeout, TimeoutError, ConnectionError, OSError) as exc:
            return ExecutionOutcome(RUNTIME_ERROR, message=f"transport error: {exc}")
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError as exc:
        return ExecutionOutcome(RUNTIME_ERROR, message=f"malformed response: {exc}")
    if not isinstance(payload, dict):
        return ExecutionOutcome(RUNTIME_ERROR, message="malformed response: not an object")
    error = _classify_errors(_errors_of(payload))
    if error is not None:
        return error
    columns, rows = _rows_from(payload)
    return ExecutionOutcome(SUCCESS, rows, "", tuple(str(c) for c in columns))


class HttpBackend:
    def __init__(self, config: HttpConfig):
        self.config = config

    def execute(self, query: str) -> ExecutionOutcome:
        return execute_http(self.config, query)
