"""Leaderboards mined from performance tables in scientific papers.

Pipeline: LaTeX tables -> comparison records -> performance improvement
graph -> pruned, aggregated tournament graph -> ranked leaderboard.
"""

from .evaluation import GroundTruth, ndcg_at_k, recall_at_k, spearman
from .graph import DropReport, ImprovementEdge, ImprovementGraph, build_raw_graph, compute_rei, orient
from .ingest import (
    ComparisonRecord,
    MetricRegistry,
    MetricSpec,
    Polarity,
    RawTable,
    extract_comparisons,
    load_records,
    normalize_metric,
    parse_tabular,
    save_records,
)
from .leaderboard import CorpusIndex, RankedLeaderboard, Scheme, find_candidates, generate, induce_subgraph
from .rankers import (
    MatchStats,
    PageRankConfig,
    Scores,
    cocitation_rank,
    exponential_tournament,
    linear_tournament,
    numeric_comparison_rank,
    pagerank,
    sink_nodes,
    to_match_stats,
)
from .sanitize import Aggregation, DummyMode, WeightedDigraph, add_dummy, aggregate, prune_outliers, sigmoid_weight

__version__ = "0.1.0"

__all__ = [
    "Aggregation", "ComparisonRecord", "CorpusIndex", "DropReport", "DummyMode", "GroundTruth",
    "ImprovementEdge", "ImprovementGraph", "MatchStats", "MetricRegistry", "MetricSpec", "PageRankConfig",
    "Polarity", "RankedLeaderboard", "RawTable", "Scheme", "Scores", "WeightedDigraph", "add_dummy",
    "aggregate", "build_raw_graph", "cocitation_rank", "compute_rei", "exponential_tournament",
    "extract_comparisons", "find_candidates", "generate", "induce_subgraph", "linear_tournament",
    "load_records", "ndcg_at_k", "normalize_metric", "numeric_comparison_rank", "orient", "pagerank",
    "parse_tabular", "prune_outliers", "recall_at_k", "save_records", "sigmoid_weight", "sink_nodes",
    "spearman", "to_match_stats",
]
