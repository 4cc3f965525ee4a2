"""Query-driven leaderboards: retrieve candidate papers, then rank them on their local graph."""

from __future__ import annotations

import json
import logging
import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .graph import ImprovementGraph
from .ingest import PaperMeta
from .rankers import (
    PageRankConfig,
    Scores,
    cocitation_from_graph,
    exponential_tournament,
    linear_tournament,
    numeric_comparison_rank,
    pagerank,
    sink_nodes,
    to_match_stats,
)
from .sanitize import Aggregation, DummyMode, WeightedDigraph, add_dummy, aggregate, induced

log = logging.getLogger(__name__)

RANKERS = ("pagerank", "linear", "exponential", "sink", "cocitation", "numeric")
# rankers that read the multigraph rather than the aggregated weighted graph
MULTIGRAPH_RANKERS = ("cocitation", "numeric")


def tokenize(text: str) -> list[str]:
    return re.findall(r"[^\W_]+", text.lower())


@dataclass
class CorpusIndex:
    papers: dict[str, PaperMeta] = field(default_factory=dict)
    tokens: dict[str, set[str]] = field(default_factory=dict)

    @classmethod
    def build(cls, papers: Iterable[PaperMeta]) -> "CorpusIndex":
        index = cls()
        for p in papers:
            if p.paper_id in index.papers:
                raise ValueError(f"duplicate paper id {p.paper_id!r}")
            index.papers[p.paper_id] = p
            for tok in set(tokenize(p.title) + tokenize(p.abstract)):
                index.tokens.setdefault(tok, set()).add(p.paper_id)
        return index


@dataclass(frozen=True)
class Scheme:
    ranker: str = "pagerank"
    aggregation: Aggregation = Aggregation.SIG_AVG
    dummy: DummyMode = DummyMode.NONE
    pagerank: PageRankConfig = field(default_factory=PageRankConfig)

    def __post_init__(self):
        if self.ranker not in RANKERS:
            raise ValueError(f"unknown ranker {self.ranker!r}; choose from {', '.join(RANKERS)}")
        object.__setattr__(self, "aggregation", Aggregation(self.aggregation))
        object.__setattr__(self, "dummy", DummyMode(self.dummy))

    @property
    def tag(self) -> str:
        if self.ranker in MULTIGRAPH_RANKERS:
            return self.ranker
        parts = [self.ranker, self.aggregation.value]
        if self.dummy is not DummyMode.NONE:
            parts.append(self.dummy.value)
        return "/".join(parts)


@dataclass(frozen=True)
class Entry:
    rank: int
    paper_id: str
    score: float


@dataclass
class RankedLeaderboard:
    query: str
    scheme: str
    k: int
    entries: list[Entry] = field(default_factory=list)

    @property
    def paper_ids(self) -> list[str]:
        return [e.paper_id for e in self.entries]

    def to_jsonl(self) -> str:
        lines = [
            json.dumps(
                {"query": self.query, "scheme": self.scheme, "rank": e.rank, "paper_id": e.paper_id, "score": e.score},
                ensure_ascii=False,
            )
            for e in self.entries
        ]
        return "".join(line + "\n" for line in lines)

    def to_text(self) -> str:
        head = f"# query: {self.query} | scheme: {self.scheme} | k: {self.k} | entries: {len(self.entries)}\n"
        if not self.entries:
            return head
        rows = [("rank", "paper_id", "score")] + [(str(e.rank), e.paper_id, f"{e.score:.6g}") for e in self.entries]
        w = [max(len(r[i]) for r in rows) for i in range(3)]
        body = "".join(f"{r[0]:>{w[0]}}  {r[1]:<{w[1]}}  {r[2]:>{w[2]}}".rstrip() + "\n" for r in rows)
        return head + body


def find_candidates(query: str, index: CorpusIndex) -> set[str]:
    """Papers whose title or abstract contains every query token."""
    tokens = tokenize(query)
    if not tokens:
        raise ValueError("query has no searchable tokens")
    found: set[str] | None = None
    for tok in tokens:
        hits = index.tokens.get(tok, set())
        found = set(hits) if found is None else found & hits
        if not found:
            return set()
    return found or set()


def induce_subgraph(graph: WeightedDigraph, candidates: Iterable[str], hops: int = 1) -> WeightedDigraph:
    """Candidates plus everything within ``hops`` comparisons of them."""
    candidates = set(candidates)
    unknown = candidates - graph.nodes
    if unknown:
        log.warning("%d candidate(s) absent from the graph were ignored", len(unknown))
    keep = candidates & graph.nodes
    adj = graph.neighbors()
    frontier = set(keep)
    for _ in range(hops):
        frontier = {m for n in frontier for m in adj[n]} - keep
        if not frontier:
            break
        keep |= frontier
    return induced(graph, keep)


def rank_graph(
    scheme: Scheme, weighted: WeightedDigraph, multigraph: ImprovementGraph | None = None
) -> Scores:
    if scheme.ranker in MULTIGRAPH_RANKERS:
        if multigraph is None:
            raise ValueError(f"ranker {scheme.ranker!r} needs the improvement multigraph")
        if scheme.ranker == "numeric":
            return numeric_comparison_rank(multigraph)
        return cocitation_from_graph(multigraph)
    g = add_dummy(weighted, scheme.dummy) if scheme.dummy is not DummyMode.NONE else weighted
    if scheme.ranker == "pagerank":
        return pagerank(g, scheme.pagerank)
    if scheme.ranker == "sink":
        return sink_nodes(g, scheme.pagerank)
    stats = to_match_stats(g)
    if scheme.ranker == "linear":
        return linear_tournament(stats)
    return exponential_tournament(stats)


def generate(
    query: str,
    scheme: Scheme,
    k: int,
    corpus: CorpusIndex,
    graph: ImprovementGraph | WeightedDigraph,
    hops: int = 1,
) -> RankedLeaderboard:
    """Top-``k`` candidate papers for ``query``.

    ``graph`` is normally the pruned improvement multigraph, aggregated here
    per ``scheme``; an already aggregated graph is accepted for the rankers
    that only need weights. Neighbors pulled in by the subgraph closure shape
    the scores but never appear in the output.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    board = RankedLeaderboard(query, scheme.tag, k)
    candidates = find_candidates(query, corpus)
    if not candidates:
        return board
    if isinstance(graph, ImprovementGraph):
        multigraph = graph
        weighted = aggregate(graph, scheme.aggregation)
    else:
        multigraph = None
        weighted = graph
    sub = induce_subgraph(weighted, candidates, hops)
    local_multi = multigraph.restrict(sub.nodes) if multigraph is not None else None
    scores = rank_graph(scheme, sub, local_multi)
    ranked = [(p, s) for p, s in scores.ranking() if p in candidates][:k]
    board.entries = [Entry(i, p, s) for i, (p, s) in enumerate(ranked, 1)]
    return board


def load_leaderboards(path) -> dict[str, list[str]]:
    """Query -> paper ids in rank order, from a JSON-lines leaderboard file."""
    rows: dict[str, list[tuple[int, str]]] = defaultdict(list)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                rows[str(obj["query"])].append((int(obj["rank"]), str(obj["paper_id"])))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad leaderboard line ({exc})") from None
    return {q: [p for _, p in sorted(r)] for q, r in rows.items()}
