"""Leaderboard quality against curated ground truth: Recall@k, NDCG@k, Spearman."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Collection, Sequence

from scipy.stats import rankdata


@dataclass(frozen=True)
class GroundTruth:
    query: str
    relevant: tuple[str, ...]
    metric: str | None = None

    def __post_init__(self):
        if not self.relevant:
            raise ValueError(f"ground truth for {self.query!r} is empty")
        if len(set(self.relevant)) != len(self.relevant):
            raise ValueError(f"ground truth for {self.query!r} repeats a paper id")


def _relevant(truth: GroundTruth | Sequence[str]) -> Sequence[str]:
    rel = truth.relevant if isinstance(truth, GroundTruth) else truth
    if not rel:
        raise ValueError("empty ground truth")
    return rel


def recall_at_k(
    ranked: Sequence[str], truth: GroundTruth | Sequence[str], k: int, within: Collection[str] | None = None
) -> float:
    """Fraction of relevant papers found in the top ``k``.

    With ``within`` (e.g. the corpus ids) the denominator only counts relevant
    papers that could have been retrieved at all.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    rel = set(_relevant(truth))
    if within is not None:
        rel &= set(within)
        if not rel:
            raise ValueError("no relevant paper lies within the given collection")
    return len(set(ranked[:k]) & rel) / len(rel)


def dcg(gains: Sequence[float]) -> float:
    total = 0.0
    for i, g in enumerate(gains, 1):
        total += g / math.log2(i + 1)
    return total


def ndcg_at_k(ranked: Sequence[str], truth: GroundTruth | Sequence[str], k: int) -> float:
    """Binary-relevance NDCG; the ideal list holds ``min(k, |relevant|)`` hits."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rel = set(_relevant(truth))
    gains = [1.0 if p in rel else 0.0 for p in ranked[:k]]
    ideal = dcg([1.0] * min(k, len(rel)))
    return dcg(gains) / ideal


def rank_correlation(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of average-rank vectors (Spearman's rho with ties)."""
    if len(x) != len(y):
        raise ValueError("sequences differ in length")
    if len(x) < 2:
        raise ValueError("need at least two observations")
    rx = rankdata(x) - (len(x) + 1) / 2
    ry = rankdata(y) - (len(y) + 1) / 2
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0:
        raise ValueError("correlation undefined for a constant ranking")
    return float(rx @ ry) / denom


def spearman(ranked: Sequence[str], truth_order: GroundTruth | Sequence[str]) -> float:
    """Spearman correlation between two orderings over the papers they share."""
    truth_ids = list(_relevant(truth_order))
    pos_truth = {p: i for i, p in enumerate(truth_ids)}
    common = [p for p in dict.fromkeys(ranked) if p in pos_truth]
    if len(common) < 2:
        raise ValueError(f"only {len(common)} paper(s) in common; need at least 2")
    pos_ranked = {p: i for i, p in enumerate(dict.fromkeys(ranked))}
    return rank_correlation([pos_ranked[p] for p in common], [pos_truth[p] for p in common])


def load_truth(path) -> list[GroundTruth]:
    truths = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                truths.append(
                    GroundTruth(str(obj["query"]), tuple(str(p) for p in obj["relevant"]), obj.get("metric"))
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad ground-truth line ({exc})") from None
    return truths


def evaluate(
    boards: dict[str, list[str]], truths: Sequence[GroundTruth], ks: Sequence[int] = (10, 20, 50)
) -> dict:
    """Per-query metrics plus macro averages over the queries that produced them."""
    per_query = []
    for t in truths:
        row: dict = {"query": t.query, "metric": t.metric}
        ranked = boards.get(t.query)
        if ranked is None:
            row["error"] = "query missing from leaderboard file"
            per_query.append(row)
            continue
        for k in ks:
            row[f"recall@{k}"] = recall_at_k(ranked, t, k)
            row[f"ndcg@{k}"] = ndcg_at_k(ranked, t, k)
        try:
            row["spearman"] = spearman(ranked, t)
        except ValueError as exc:
            row["spearman_error"] = str(exc)
        per_query.append(row)

    keys = [f"{m}@{k}" for k in ks for m in ("recall", "ndcg")] + ["spearman"]
    macro = {}
    for key in keys:
        vals = [r[key] for r in per_query if key in r]
        macro[key] = math.fsum(vals) / len(vals) if vals else None
        macro[f"{key}_n"] = len(vals)
    return {"per_query": per_query, "macro": macro}
