"""Local sanitization: outlier pruning, multi-edge aggregation, dummy nodes."""

from __future__ import annotations

import enum
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Mapping

from .graph import GraphFileError, ImprovementGraph, read_header

DEFAULT_THRESHOLD = 1.0
DUMMY_ID = "__dummy__"


class Aggregation(str, enum.Enum):
    UNW = "UNW"
    ALL = "ALL"
    SIG_AVG = "SIG_AVG"
    SIG_MAX = "SIG_MAX"


class DummyMode(str, enum.Enum):
    NONE = "none"
    WINNER = "winner"
    LOSER = "loser"


@dataclass(frozen=True)
class WeightedDigraph:
    """At most one weighted edge per ordered pair ``(worse, better)``."""

    nodes: frozenset[str]
    edges: Mapping[tuple[str, str], float] = field(default_factory=dict)
    scheme: str = Aggregation.UNW.value
    dummy: str | None = None

    @property
    def real_nodes(self) -> list[str]:
        return sorted(n for n in self.nodes if n != self.dummy)

    def out_degree(self) -> dict[str, int]:
        deg = {n: 0 for n in self.nodes}
        for u, _ in self.edges:
            deg[u] += 1
        return deg

    def neighbors(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {n: set() for n in self.nodes}
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj


def prune_outliers(graph: ImprovementGraph, threshold: float = DEFAULT_THRESHOLD) -> ImprovementGraph:
    """Keep edges with REI <= threshold. Nodes are never removed."""
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    kept = tuple(e for e in graph.edges if e.rei <= threshold)
    return ImprovementGraph(graph.nodes, kept, frozenset(e.metric for e in kept))


def sigmoid_weight(rei: float) -> float:
    if rei >= 0:
        return 1.0 / (1.0 + math.exp(-rei))
    z = math.exp(rei)
    return z / (1.0 + z)


def aggregate(graph: ImprovementGraph, scheme: Aggregation | str) -> WeightedDigraph:
    """Collapse parallel edges into one weighted edge per ordered pair.

    Does not prune; call :func:`prune_outliers` first.
    """
    scheme = Aggregation(scheme)
    groups: dict[tuple[str, str], list[float]] = defaultdict(list)
    for e in graph.edges:
        groups[(e.worse, e.better)].append(e.rei)
    edges: dict[tuple[str, str], float] = {}
    for pair in sorted(groups):
        reis = groups[pair]
        if scheme is Aggregation.UNW:
            w = 1.0
        elif scheme is Aggregation.ALL:
            w = float(len(reis))
        else:
            sig = [sigmoid_weight(r) for r in reis]
            # min() guards against the rounded mean of equal values landing one ulp above them
            w = max(sig) if scheme is Aggregation.SIG_MAX else min(math.fsum(sig) / len(sig), max(sig))
        edges[pair] = w
    return WeightedDigraph(graph.nodes, edges, scheme.value)


def add_dummy(graph: WeightedDigraph, mode: DummyMode | str, dummy_id: str = DUMMY_ID) -> WeightedDigraph:
    """Attach a node that beats (winner) or loses to (loser) every real node.

    Dummy edges weigh 1 whatever the aggregation scheme.
    """
    mode = DummyMode(mode)
    if mode is DummyMode.NONE:
        return graph
    if dummy_id in graph.nodes:
        raise ValueError(f"dummy id {dummy_id!r} collides with a real node")
    edges = dict(graph.edges)
    for n in sorted(graph.nodes):
        pair = (n, dummy_id) if mode is DummyMode.WINNER else (dummy_id, n)
        edges[pair] = 1.0
    return replace(graph, nodes=graph.nodes | {dummy_id}, edges=edges, dummy=dummy_id)


def induced(graph: WeightedDigraph, keep) -> WeightedDigraph:
    keep = frozenset(keep) & graph.nodes
    edges = {p: w for p, w in graph.edges.items() if p[0] in keep and p[1] in keep}
    dummy = graph.dummy if graph.dummy in keep else None
    return WeightedDigraph(keep, edges, graph.scheme, dummy)


def dump_weighted(graph: WeightedDigraph, path) -> None:
    header = {
        "kind": "weighted",
        "scheme": graph.scheme,
        "nodes": len(graph.nodes),
        "edges": len(graph.edges),
        "dummy": graph.dummy,
        "node_ids": sorted(graph.nodes),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for (u, v) in sorted(graph.edges):
            fh.write(json.dumps({"worse": u, "better": v, "weight": graph.edges[(u, v)]}, ensure_ascii=False) + "\n")


def load_weighted(path) -> WeightedDigraph:
    header = read_header(path)
    if header["kind"] != "weighted":
        raise GraphFileError(f"{path}: expected a weighted graph, found {header['kind']!r}")
    edges: dict[tuple[str, str], float] = {}
    with open(path, encoding="utf-8") as fh:
        next(fh)
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                u, v, w = str(obj["worse"]), str(obj["better"]), float(obj["weight"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise GraphFileError(f"{path}:{lineno}: bad edge line ({exc})") from None
            if not (w > 0 and math.isfinite(w)):
                raise GraphFileError(f"{path}:{lineno}: weight must be positive and finite")
            if u == v:
                raise GraphFileError(f"{path}:{lineno}: self-loop on {u!r}")
            edges[(u, v)] = w
    nodes = frozenset(header.get("node_ids", ())) | frozenset(p for pair in edges for p in pair)
    return WeightedDigraph(nodes, edges, str(header.get("scheme", Aggregation.UNW.value)), header.get("dummy"))
