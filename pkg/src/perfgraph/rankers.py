"""Node scoring schemes over sanitized performance graphs.

Edges point from the worse paper to the better one, so in tournament terms
an edge ``u -> v`` with weight ``w`` is ``w`` wins for ``v`` over ``u``.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import sparse

from .graph import ImprovementGraph
from .ingest import ComparisonRecord
from .sanitize import WeightedDigraph

# bound on exponential-tournament values; an undefeated team otherwise drifts to infinity
VALUE_CLAMP = 20.0


@dataclass
class Scores:
    scores: dict[str, float]
    scheme: str
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True
    # secondary sort key (descending) consulted before the paper id
    tiebreak: dict[str, float] | None = None

    def ranking(self) -> list[tuple[str, float]]:
        tb = self.tiebreak or {}
        order = sorted(self.scores, key=lambda p: (-self.scores[p], -tb.get(p, 0.0), p))
        return [(p, self.scores[p]) for p in order]

    def diagnostics(self) -> dict:
        return {
            "scheme": self.scheme,
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
        }

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for rank, (pid, score) in enumerate(self.ranking(), 1):
                fh.write(json.dumps({"paper_id": pid, "score": score, "rank": rank}, ensure_ascii=False) + "\n")
            fh.write(json.dumps({"diagnostics": self.diagnostics()}) + "\n")


@dataclass
class PageRankConfig:
    damping: float = 0.90
    tolerance: float = 1e-10
    max_iterations: int = 200

    def __post_init__(self):
        if not 0 < self.damping < 1:
            raise ValueError(f"damping must lie in (0, 1), got {self.damping}")


@dataclass
class MatchStats:
    teams: list[str]
    M: np.ndarray
    R: np.ndarray
    dummy: str | None = None

    @property
    def m(self) -> np.ndarray:
        return self.M.sum(axis=1)

    @property
    def d(self) -> np.ndarray:
        return self.R - self.R.T

    @property
    def d_bar(self) -> np.ndarray:
        return self.d.sum(axis=1) / self.m

    def _scores(self, values: np.ndarray, scheme: str, **diag) -> Scores:
        out = {t: float(x) for t, x in zip(self.teams, values) if t != self.dummy}
        return Scores(out, scheme, **diag)


def to_match_stats(graph: WeightedDigraph) -> MatchStats:
    teams = sorted(graph.nodes)
    idx = {t: i for i, t in enumerate(teams)}
    n = len(teams)
    R = np.zeros((n, n))
    for (u, v), w in graph.edges.items():
        R[idx[v], idx[u]] += w
    M = R + R.T
    np.fill_diagonal(M, 1.0)
    return MatchStats(teams, M, R, graph.dummy)


def linear_tournament(stats: MatchStats, max_terms: int = 100, tol: float = 1e-9) -> Scores:
    """Partial sums of ``sum_t Mbar^t d_bar`` with ``Mbar`` the row-normalized match matrix."""
    if not stats.teams:
        return Scores({}, "linear")
    M_bar = stats.M / stats.m[:, None]
    d_bar = stats.d_bar
    s = d_bar.copy()
    term = d_bar
    change = float(np.abs(term).max())
    converged = change < tol
    t = 0
    while not converged and t < max_terms:
        t += 1
        term = M_bar @ term
        s = s + term
        change = float(np.abs(term).max())
        converged = change < tol
    return stats._scores(s, "linear", iterations=t, residual=change, converged=converged)


def _expected_wins(v: np.ndarray, M_off: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    diff = v[:, None] - v[None, :]
    P = 0.5 * (1.0 + np.tanh(0.5 * diff))  # logistic, overflow-free
    return (M_off * P).sum(axis=1), P


def _centre_and_clamp(x: np.ndarray) -> np.ndarray:
    """``clip(x - c)`` with the shift ``c`` chosen so the result sums to zero."""
    if float(np.abs(x - x.mean()).max()) <= VALUE_CLAMP:
        return x - x.mean()
    # the clipped sum decreases monotonically in c; bisect for its root
    lo, hi = float(x.min()) - VALUE_CLAMP, float(x.max()) + VALUE_CLAMP
    for _ in range(200):
        c = 0.5 * (lo + hi)
        if np.clip(x - c, -VALUE_CLAMP, VALUE_CLAMP).sum() > 0:
            lo = c
        else:
            hi = c
        if hi - lo < 1e-15 * max(1.0, abs(c)):
            break
    out = np.clip(x - 0.5 * (lo + hi), -VALUE_CLAMP, VALUE_CLAMP)
    # spread any rounding residue over the unclamped entries
    free = np.abs(out) < VALUE_CLAMP
    if free.any():
        out[free] -= out.sum() / free.sum()
    return np.clip(out, -VALUE_CLAMP, VALUE_CLAMP, out=out)


def fit_exponential_values(
    stats: MatchStats, lr: float = 0.1, max_iter: int = 5000, tol: float = 1e-8, method: str = "newton"
) -> tuple[np.ndarray, int, float, bool]:
    """Team values ``v`` (summing to zero) whose logistic model reproduces the win totals.

    Minimizes the squared residual between observed and expected wins.
    ``method="gradient"`` takes plain gradient steps starting at ``lr``;
    ``"newton"`` takes damped Gauss-Newton steps, which reach the value clamp
    quickly when a team is unbeaten and the optimum lies at infinity. Either
    way a step that would raise the loss is halved and retried.

    Returns ``(v, iterations, max residual, converged)``.
    """
    if method not in ("newton", "gradient"):
        raise ValueError(f"unknown fitting method {method!r}")
    n = len(stats.teams)
    if n == 0:
        return np.zeros(0), 0, 0.0, True
    M_off = stats.M.copy()
    np.fill_diagonal(M_off, 0.0)
    rho = stats.R.sum(axis=1)

    v = np.zeros(n)
    expected, P = _expected_wins(v, M_off)
    err = rho - expected
    loss = float(err @ err)
    step = lr if method == "gradient" else 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if float(np.abs(err).max()) < tol:
            converged = True
            break
        W = M_off * P * (1.0 - P)
        J = np.diag(W.sum(axis=1)) - W  # Jacobian of expected wins, symmetric
        if method == "gradient":
            direction = 2.0 * (J @ err)
            if float(np.abs(direction).max()) < tol:
                converged = True
                break
        else:
            # minimum-norm solution keeps each connected component centred
            direction = np.linalg.lstsq(J, err, rcond=None)[0]
            step = 1.0
        while True:
            cand = _centre_and_clamp(v + step * direction)
            c_expected, c_P = _expected_wins(cand, M_off)
            c_err = rho - c_expected
            c_loss = float(c_err @ c_err)
            if c_loss <= loss or step < 1e-12:
                break
            step *= 0.5
        moved = float(np.abs(cand - v).max())
        v, P, err, loss = cand, c_P, c_err, c_loss
        if method == "gradient":
            step *= 1.1
        if moved < tol:
            converged = True
            break
    return v, it, float(np.abs(err).max()), converged


def win_probabilities(v: np.ndarray) -> np.ndarray:
    """``p_ij``: probability that team i beats team j under fitted values ``v``."""
    diff = v[:, None] - v[None, :]
    return 1.0 / (1.0 + np.exp(-diff))


def exponential_tournament(
    stats: MatchStats, lr: float = 0.1, max_iter: int = 5000, tol: float = 1e-8, method: str = "newton"
) -> Scores:
    """Rank by ``sum_{j != i} log p_ij``, the log-probability that i beats everyone."""
    v, iters, residual, converged = fit_exponential_values(stats, lr, max_iter, tol, method)
    if len(v) == 0:
        return Scores({}, "exponential")
    diff = v[:, None] - v[None, :]
    log_p = -np.logaddexp(0.0, -diff)
    np.fill_diagonal(log_p, 0.0)
    return stats._scores(
        log_p.sum(axis=1), "exponential", iterations=iters, residual=residual, converged=converged
    )


def pagerank_vector(graph: WeightedDigraph, cfg: PageRankConfig | None = None) -> tuple[list[str], np.ndarray, int, float, bool]:
    cfg = cfg or PageRankConfig()
    nodes = sorted(graph.nodes)
    n = len(nodes)
    if n == 0:
        return nodes, np.zeros(0), 0, 0.0, True
    idx = {p: i for i, p in enumerate(nodes)}
    pairs = sorted(graph.edges)
    rows = np.array([idx[u] for u, _ in pairs], dtype=np.int64)
    cols = np.array([idx[v] for _, v in pairs], dtype=np.int64)
    data = np.array([graph.edges[p] for p in pairs], dtype=float)
    W = sparse.csr_matrix((data, (rows, cols)), shape=(n, n))
    out = np.asarray(W.sum(axis=1)).ravel()
    dangling = out == 0
    inv = np.zeros(n)
    inv[~dangling] = 1.0 / out[~dangling]
    P = sparse.diags(inv) @ W
    PT = P.T.tocsr()

    alpha = cfg.damping
    x = np.full(n, 1.0 / n)
    err = 0.0
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        new = alpha * (PT @ x) + (alpha * x[dangling].sum() + 1.0 - alpha) / n
        new /= new.sum()
        err = float(np.abs(new - x).sum())
        x = new
        if err < cfg.tolerance:
            converged = True
            break
    return nodes, x, it, err, converged


def pagerank(graph: WeightedDigraph, cfg: PageRankConfig | None = None) -> Scores:
    """Weighted PageRank; mass flows along edges toward the better paper.

    Dangling nodes spread their mass uniformly. When the graph carries a
    dummy node it takes part in the iteration but is removed from the result,
    which is renormalized over the real nodes.
    """
    nodes, x, it, err, converged = pagerank_vector(graph, cfg)
    keep = [i for i, p in enumerate(nodes) if p != graph.dummy]
    total = x[keep].sum() if keep else 1.0
    scores = {nodes[i]: float(x[i] / total) for i in keep}
    return Scores(scores, "pagerank", iterations=it, residual=err, converged=converged)


def sink_nodes(graph: WeightedDigraph, cfg: PageRankConfig | None = None) -> Scores:
    """1 for papers nothing outperforms (no out-edges), else 0; PageRank breaks ties.

    Edges touching a dummy node are ignored when deciding who is a sink.
    """
    out = {n: 0 for n in graph.nodes if n != graph.dummy}
    for u, v in graph.edges:
        if u in out and v != graph.dummy:
            out[u] += 1
    pr = pagerank(graph, cfg)
    scores = {n: 1.0 if deg == 0 else 0.0 for n, deg in out.items()}
    return Scores(scores, "sink", pr.iterations, pr.residual, pr.converged, tiebreak=pr.scores)


def _cocitation_from_pairs(pairs: Iterable[tuple[str, str]], nodes: Iterable[str] = ()) -> Scores:
    partners: dict[str, set[str]] = defaultdict(set)
    multiplicity: dict[str, int] = defaultdict(int)
    for n in nodes:
        partners.setdefault(n, set())
    for a, b in pairs:
        if a == b:
            partners.setdefault(a, set())
            continue
        partners[a].add(b)
        partners[b].add(a)
        multiplicity[a] += 1
        multiplicity[b] += 1
    scores = {p: float(len(s)) for p, s in partners.items()}
    tiebreak = {p: float(multiplicity[p]) for p in partners}
    return Scores(scores, "cocitation", tiebreak=tiebreak)


def cocitation_rank(records: Iterable[ComparisonRecord], nodes: Iterable[str] = ()) -> Scores:
    """Number of distinct papers each paper was compared with in some table.

    Ties fall back to the number of comparisons the paper took part in.
    """
    return _cocitation_from_pairs(((r.paper_lo, r.paper_hi) for r in records), nodes)


def cocitation_from_graph(graph: ImprovementGraph) -> Scores:
    return _cocitation_from_pairs(((e.worse, e.better) for e in graph.edges), graph.nodes)


def numeric_comparison_rank(graph: ImprovementGraph) -> Scores:
    """Net wins over raw edges: in-degree minus out-degree."""
    score = {n: 0.0 for n in graph.nodes}
    for e in graph.edges:
        score[e.better] += 1
        score[e.worse] -= 1
    return Scores(score, "numeric")
