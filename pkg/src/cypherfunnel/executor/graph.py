"""In-memory property graph used by the micro engine."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

Scalar = Union[str, int, float, bool, None]


class GraphFixtureError(ValueError):
    pass


@dataclass(frozen=True)
class Node:
    id: Any
    labels: frozenset[str]
    props: dict[str, Scalar] = field(default_factory=dict, hash=False, compare=False)


@dataclass(frozen=True)
class Edge:
    index: int
    src: Any
    type: str
    dst: Any
    props: dict[str, Scalar] = field(default_factory=dict, hash=False, compare=False)


class MicroGraph:
    def __init__(self, nodes: list[Node], edges: list[Edge]):
        self.nodes: dict[Any, Node] = {}
        for node in nodes:
            if node.id in self.nodes:
                raise GraphFixtureError(f"duplicate node id {node.id!r}")
            self.nodes[node.id] = node
        for edge in edges:
            for end in (edge.src, edge.dst):
                if end not in self.nodes:
                    raise GraphFixtureError(f"edge {edge.index} references unknown node {end!r}")
        self.edges = list(edges)

    @classmethod
    def from_dict(cls, data: dict) -> "MicroGraph":
        try:
            nodes = [
                Node(n["id"], frozenset(n.get("labels", [])), dict(n.get("props", {})))
                for n in data["nodes"]
            ]
            edges = [
                Edge(i, e["src"], e["type"], e["dst"], dict(e.get("props", {})))
                for i, e in enumerate(data.get("edges", []))
            ]
        except (KeyError, TypeError) as exc:
            raise GraphFixtureError(f"malformed graph fixture: {exc!r}") from exc
        return cls(nodes, edges)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "MicroGraph":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise GraphFixtureError(f"cannot read graph fixture {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {"id": n.id, "labels": sorted(n.labels), "props": n.props}
                for n in self.nodes.values()
            ],
            "edges": [
                {"src": e.src, "type": e.type, "dst": e.dst, "props": e.props} for e in self.edges
            ],
        }

    def schema_triples(self) -> set[tuple[str, str, str]]:
        """Observed (source label, type, target label) combinations."""
        out = set()
        for e in self.edges:
            for a in self.nodes[e.src].labels:
                for b in self.nodes[e.dst].labels:
                    out.add((a, e.type, b))
        return out
