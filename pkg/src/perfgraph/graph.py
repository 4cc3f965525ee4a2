"""Raw performance improvement graph.

Each comparison record becomes one directed edge pointing from the worse
paper to the better one, annotated with the metric, both scores, the paper
that reported them and the relative edge improvement (REI).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable

from .ingest import ComparisonRecord, MetricRegistry, MetricSpec, Polarity


class UndefinedREI(ArithmeticError):
    """The REI denominator is zero."""


@dataclass(frozen=True)
class ImprovementEdge:
    worse: str
    better: str
    metric: str
    score_worse: float
    score_better: float
    reporter: str
    rei: float


@dataclass(frozen=True)
class ImprovementGraph:
    nodes: frozenset[str]
    edges: tuple[ImprovementEdge, ...]
    metrics: frozenset[str]

    @classmethod
    def empty(cls) -> "ImprovementGraph":
        return cls(frozenset(), (), frozenset())

    def restrict(self, keep: Iterable[str]) -> "ImprovementGraph":
        """Subgraph induced by ``keep`` (ids outside the graph are ignored)."""
        keep = frozenset(keep) & self.nodes
        edges = tuple(e for e in self.edges if e.worse in keep and e.better in keep)
        return ImprovementGraph(keep, edges, frozenset(e.metric for e in edges))


@dataclass
class DropReport:
    ties: int = 0
    zero_denominator: int = 0
    self_comparisons: int = 0
    non_finite: int = 0

    @property
    def total(self) -> int:
        return self.ties + self.zero_denominator + self.self_comparisons + self.non_finite

    def to_dict(self) -> dict:
        return asdict(self)


def compute_rei(score_worse: float, score_better: float, polarity: Polarity | str = Polarity.BENEFIT) -> float:
    """Relative improvement of ``score_better`` over ``score_worse``.

    Benefit metrics divide the gain by the worse score; cost metrics divide the
    saving by the better (smaller) cost so large gaps stay unbounded either
    way. The magnitude of the denominator is used, which keeps REI positive
    for negative-valued metrics such as log-likelihoods.
    """
    if Polarity(polarity) is Polarity.BENEFIT:
        num, den = score_better - score_worse, score_worse
    else:
        num, den = score_worse - score_better, score_better
    if den == 0:
        raise UndefinedREI(f"zero denominator for scores ({score_worse}, {score_better})")
    return num / abs(den)


def orient(record: ComparisonRecord, spec: MetricSpec) -> ImprovementEdge | None:
    """Edge worse -> better for a record, or None for ties and undefined REI."""
    if record.value_lo == record.value_hi:
        return None
    if spec.polarity is Polarity.BENEFIT:
        worse, s_worse, better, s_better = record.paper_lo, record.value_lo, record.paper_hi, record.value_hi
    else:
        worse, s_worse, better, s_better = record.paper_hi, record.value_hi, record.paper_lo, record.value_lo
    try:
        rei = compute_rei(s_worse, s_better, spec.polarity)
    except UndefinedREI:
        return None
    return ImprovementEdge(worse, better, spec.name, s_worse, s_better, record.reporter, rei)


def build_raw_graph(
    records: Iterable[ComparisonRecord], registry: MetricRegistry | None = None
) -> tuple[ImprovementGraph, DropReport]:
    registry = registry or MetricRegistry.default()
    records = list(records)
    report = DropReport()
    edges = []
    for rec in records:
        if rec.paper_lo == rec.paper_hi:
            report.self_comparisons += 1
            continue
        if not (math.isfinite(rec.value_lo) and math.isfinite(rec.value_hi)):
            report.non_finite += 1
            continue
        if rec.value_lo == rec.value_hi:
            report.ties += 1
            continue
        edge = orient(rec, registry.resolve(rec.metric))
        if edge is None:
            report.zero_denominator += 1
            continue
        edges.append(edge)
    # papers whose comparisons were all dropped stay as isolated nodes
    nodes = frozenset(p for rec in records for p in (rec.paper_lo, rec.paper_hi))
    return ImprovementGraph(nodes, tuple(edges), frozenset(e.metric for e in edges)), report


# ---------------------------------------------------------------------------
# dump format: header line, then one edge per line

_EDGE_FIELDS = ("worse", "better", "metric", "score_worse", "score_better", "reporter", "rei")


class GraphFileError(ValueError):
    pass


def dump_graph(graph: ImprovementGraph, path) -> None:
    header = {
        "kind": "improvement",
        "nodes": len(graph.nodes),
        "edges": len(graph.edges),
        "metrics": len(graph.metrics),
        "node_ids": sorted(graph.nodes),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for e in graph.edges:
            fh.write(json.dumps(asdict(e), ensure_ascii=False) + "\n")


def read_header(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    try:
        header = json.loads(first)
    except json.JSONDecodeError as exc:
        raise GraphFileError(f"{path}:1: malformed header ({exc.msg})") from None
    if not isinstance(header, dict) or "kind" not in header:
        raise GraphFileError(f"{path}:1: header lacks 'kind'")
    return header


def load_graph(path) -> ImprovementGraph:
    header = read_header(path)
    if header["kind"] != "improvement":
        raise GraphFileError(f"{path}: expected an improvement graph, found {header['kind']!r}")
    edges = []
    with open(path, encoding="utf-8") as fh:
        next(fh)
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                edges.append(ImprovementEdge(**{k: obj[k] for k in _EDGE_FIELDS}))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise GraphFileError(f"{path}:{lineno}: bad edge line ({exc})") from None
    nodes = frozenset(header.get("node_ids", ())) | frozenset(p for e in edges for p in (e.worse, e.better))
    return ImprovementGraph(nodes, tuple(edges), frozenset(e.metric for e in edges))
