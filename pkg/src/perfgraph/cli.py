"""``perfgraph`` command line: extract, build, rank, leaderboard, eval."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

from . import ingest
from .evaluation import evaluate, load_truth
from .graph import GraphFileError, ImprovementGraph, build_raw_graph, dump_graph, load_graph, read_header
from .leaderboard import RANKERS, CorpusIndex, Scheme, generate, load_leaderboards, rank_graph
from .rankers import PageRankConfig, Scores
from .sanitize import Aggregation, DummyMode, aggregate, dump_weighted, load_weighted, prune_outliers

log = logging.getLogger("perfgraph")


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    rei_threshold: float | None = 1.0  # None disables pruning
    aggregation: str = Aggregation.SIG_AVG.value
    dummy: str = DummyMode.NONE.value
    pagerank_alpha: float = 0.90
    pagerank_tol: float = 1e-10
    pagerank_max_iter: int = 200
    ranker: str = "pagerank"
    k: int = 50
    corpus: str | None = None
    records: str | None = None
    graph: str | None = None
    truth: str | None = None

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a flat JSON object")
        return cls().updated(data)

    def updated(self, values: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(self)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        cfg = dataclasses.replace(self, **values)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if isinstance(self.rei_threshold, str):
            try:
                self.rei_threshold = float(self.rei_threshold)
            except ValueError:
                raise ConfigError(f"rei_threshold must be a number, got {self.rei_threshold!r}") from None
        if self.rei_threshold is not None and math.isinf(self.rei_threshold):
            self.rei_threshold = None
        if self.rei_threshold is not None and not self.rei_threshold > 0:
            raise ConfigError("rei_threshold must be positive")
        try:
            Aggregation(self.aggregation)
            DummyMode(self.dummy)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.ranker not in RANKERS:
            raise ConfigError(f"unknown ranker {self.ranker!r}; valid: {', '.join(RANKERS)}")
        if not 0 < self.pagerank_alpha < 1:
            raise ConfigError("pagerank_alpha must lie in (0, 1)")
        if int(self.k) < 1:
            raise ConfigError("k must be >= 1")

    def scheme(self) -> Scheme:
        pr = PageRankConfig(self.pagerank_alpha, self.pagerank_tol, int(self.pagerank_max_iter))
        return Scheme(self.ranker, Aggregation(self.aggregation), DummyMode(self.dummy), pr)


# ---------------------------------------------------------------------------
# output helpers


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _scores_text(scores: Scores, fmt: str) -> str:
    ranking = scores.ranking()
    if fmt == "json":
        lines = [
            json.dumps({"paper_id": p, "score": s, "rank": r}, ensure_ascii=False)
            for r, (p, s) in enumerate(ranking, 1)
        ]
        lines.append(json.dumps({"diagnostics": scores.diagnostics()}))
        return "".join(line + "\n" for line in lines)
    width = max((len(p) for p, _ in ranking), default=8)
    rows = [f"{r:>5}  {p:<{width}}  {s:.10g}" for r, (p, s) in enumerate(ranking, 1)]
    d = scores.diagnostics()
    rows.append(f"# {d['scheme']}: iterations={d['iterations']} residual={d['residual']:.3g} converged={d['converged']}")
    return "\n".join(rows) + "\n"


def _require(value, name: str) -> str:
    if not value:
        raise ConfigError(f"missing required path: --{name} (or '{name}' in the config file)")
    return value


# ---------------------------------------------------------------------------
# commands


def cmd_extract(in_dir, out_records, registry: ingest.MetricRegistry | None = None) -> dict:
    in_dir = Path(in_dir)
    if not in_dir.is_dir():
        raise ConfigError(f"not a directory: {in_dir}")
    records: list[ingest.ComparisonRecord] = []
    warnings: list[ingest.ParseWarning] = []
    stats = {"files": 0, "skipped_files": 0, "tables": 0, "records": 0}
    for path in ingest.tex_files(in_dir):
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            log.warning("skipping unreadable %s: %s", path, exc)
            stats["skipped_files"] += 1
            continue
        stats["files"] += 1
        tables = ingest.parse_tabular(text, path.stem, warnings)
        stats["tables"] += len(tables)
        for table in tables:
            records.extend(ingest.extract_comparisons(table, registry))
    stats["records"] = len(records)
    stats["parse_warnings"] = len(warnings)
    ingest.save_records(records, out_records)
    return stats


def cmd_build(records_path, out_dir, cfg: PipelineConfig) -> dict:
    records = ingest.load_records(records_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    raw, drops = build_raw_graph(records)
    clean = prune_outliers(raw, cfg.rei_threshold) if cfg.rei_threshold is not None else raw
    weighted = aggregate(clean, cfg.aggregation)
    dump_graph(raw, out_dir / "raw_graph.jsonl")
    dump_graph(clean, out_dir / "sanitized_graph.jsonl")
    dump_weighted(weighted, out_dir / "weighted_graph.jsonl")
    summary = {
        "records": len(records),
        "nodes": len(raw.nodes),
        "raw_edges": len(raw.edges),
        "pruned": len(raw.edges) - len(clean.edges),
        "sanitized_edges": len(clean.edges),
        "weighted_edges": len(weighted.edges),
        "metrics": len(raw.metrics),
        "rei_threshold": cfg.rei_threshold,
        "aggregation": weighted.scheme,
        "drops": drops.to_dict(),
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    return summary


def _load_any_graph(path):
    kind = read_header(path)["kind"]
    if kind == "improvement":
        return load_graph(path)
    if kind == "weighted":
        return load_weighted(path)
    raise GraphFileError(f"{path}: unknown graph kind {kind!r}")


def cmd_rank(graph_path, cfg: PipelineConfig) -> Scores:
    graph = _load_any_graph(graph_path)
    scheme = cfg.scheme()
    if isinstance(graph, ImprovementGraph):
        return rank_graph(scheme, aggregate(graph, scheme.aggregation), graph)
    return rank_graph(scheme, graph)


def cmd_leaderboard(queries, cfg: PipelineConfig, fmt: str = "text") -> str:
    corpus = CorpusIndex.build(ingest.load_corpus(_require(cfg.corpus, "corpus")))
    graph = _load_any_graph(_require(cfg.graph, "graph"))
    scheme = cfg.scheme()
    chunks = []
    for q in queries:
        board = generate(q, scheme, int(cfg.k), corpus, graph)
        if not board.entries:
            log.warning("no candidates for query %r", q)
        chunks.append(board.to_jsonl() if fmt == "json" else board.to_text())
    return "".join(chunks) if fmt == "json" else "\n".join(chunks)


def cmd_eval(leaderboard_path, truth_path, ks) -> dict:
    boards = load_leaderboards(leaderboard_path)
    truths = load_truth(truth_path)
    return evaluate(boards, truths, ks)


def _eval_text(report: dict, ks) -> str:
    cols = [f"{m}@{k}" for k in ks for m in ("recall", "ndcg")] + ["spearman"]
    lines = ["\t".join(["query", "metric"] + cols)]

    def fmt(v):
        return "-" if v is None else f"{v:.4f}"

    for row in report["per_query"]:
        lines.append("\t".join([row["query"], str(row.get("metric") or "-")] + [fmt(row.get(c)) for c in cols]))
    lines.append("\t".join(["MACRO", "-"] + [fmt(report["macro"].get(c)) for c in cols]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# argument parsing


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON config file; flags override its values")
    common.add_argument("--format", choices=("text", "json"), default=None)
    common.add_argument("--out", help="output path (directory for build); stdout when omitted")
    common.add_argument("-v", "--verbose", action="store_true")

    sanit = argparse.ArgumentParser(add_help=False)
    sanit.add_argument("--aggregation", choices=[a.value for a in Aggregation])
    sanit.add_argument("--dummy", choices=[d.value for d in DummyMode])

    ranking = argparse.ArgumentParser(add_help=False)
    ranking.add_argument("--ranker", choices=RANKERS)
    ranking.add_argument("--alpha", dest="pagerank_alpha", type=float)
    ranking.add_argument("--tol", dest="pagerank_tol", type=float)
    ranking.add_argument("--max-iter", dest="pagerank_max_iter", type=int)

    p = argparse.ArgumentParser(prog="perfgraph", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("extract", parents=[common], help="LaTeX tables -> comparison records")
    e.add_argument("in_dir")

    b = sub.add_parser("build", parents=[common, sanit], help="records -> raw, sanitized and weighted graphs")
    b.add_argument("--records")
    b.add_argument("--rei-threshold", dest="rei_threshold", type=float, help="prune edges with larger REI; inf disables")

    r = sub.add_parser("rank", parents=[common, sanit, ranking], help="score every node of a graph")
    r.add_argument("--graph")

    lb = sub.add_parser("leaderboard", parents=[common, sanit, ranking], help="generate leaderboards for queries")
    lb.add_argument("--query", action="append", required=True)
    lb.add_argument("--corpus")
    lb.add_argument("--graph")
    lb.add_argument("--k", type=int)

    ev = sub.add_parser("eval", parents=[common], help="score leaderboards against ground truth")
    ev.add_argument("--leaderboard", required=True)
    ev.add_argument("--truth")
    ev.add_argument("--k", dest="ks", type=int, nargs="+", default=[10, 20, 50])
    return p


_CONFIG_FLAGS = (
    "rei_threshold", "aggregation", "dummy", "pagerank_alpha", "pagerank_tol", "pagerank_max_iter",
    "ranker", "k", "corpus", "records", "graph", "truth",
)


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    overrides = {k: getattr(args, k) for k in _CONFIG_FLAGS if getattr(args, k, None) is not None}
    return cfg.updated(overrides)


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = _config(args)
        fmt = args.format or ("text" if args.command == "leaderboard" else "json")
        if args.command == "extract":
            out = _require(args.out or cfg.records, "out")
            stats = cmd_extract(args.in_dir, out)
            print(json.dumps(stats, sort_keys=True), file=sys.stderr)
        elif args.command == "build":
            out = _require(args.out, "out")
            summary = cmd_build(_require(cfg.records, "records"), out, cfg)
            print(json.dumps(summary, sort_keys=True), file=sys.stderr)
        elif args.command == "rank":
            scores = cmd_rank(_require(cfg.graph, "graph"), cfg)
            _emit(_scores_text(scores, fmt), args.out)
        elif args.command == "leaderboard":
            _emit(cmd_leaderboard(args.query, cfg, fmt), args.out)
        elif args.command == "eval":
            report = cmd_eval(args.leaderboard, _require(cfg.truth, "truth"), args.ks)
            text = json.dumps(report, indent=2) + "\n" if fmt == "json" else _eval_text(report, args.ks)
            _emit(text, args.out)
            rows = report["per_query"]
            if rows and all("error" in r for r in rows):
                print("error: no ground-truth query matched the leaderboard file", file=sys.stderr)
                return 1
    except (ConfigError, ingest.RecordFileError, GraphFileError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
