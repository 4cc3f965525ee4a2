import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from perfgraph.cli import ConfigError, PipelineConfig, main
from perfgraph.ingest import ComparisonRecord, load_records, save_records
from perfgraph.rankers import pagerank
from perfgraph.sanitize import WeightedDigraph, dump_weighted

FIXTURES = Path(__file__).parent / "fixtures"


def run(*argv) -> int:
    return main([str(a) for a in argv])


@pytest.fixture
def fig1_dir(tmp_path):
    d = tmp_path / "tex"
    d.mkdir()
    shutil.copy(FIXTURES / "tables" / "t01_three_methods.tex", d / "P.tex")
    return d


def test_extract_empty_dir(tmp_path):
    (tmp_path / "in").mkdir()
    out = tmp_path / "r.jsonl"
    assert run("extract", tmp_path / "in", "--out", out) == 0
    assert out.read_bytes() == b""


def test_extract_fig1_and_rerun(fig1_dir, tmp_path):
    out = tmp_path / "r.jsonl"
    assert run("extract", fig1_dir, "--out", out) == 0
    recs = load_records(out)
    assert len(recs) == 6 and {r.reporter for r in recs} == {"P"}
    first = out.read_bytes()
    assert run("extract", fig1_dir, "--out", out) == 0
    assert out.read_bytes() == first


def test_extract_missing_dir(tmp_path, capsys):
    assert run("extract", tmp_path / "nope", "--out", tmp_path / "r.jsonl") == 1
    assert "not a directory" in capsys.readouterr().err


def _build(tmp_path, recs, *extra):
    rp = tmp_path / "r.jsonl"
    save_records(recs, rp)
    out = tmp_path / "g"
    assert run("build", "--records", rp, "--out", out, *extra) == 0
    return json.loads((out / "summary.json").read_text())


def test_build_all_ties(tmp_path):
    s = _build(tmp_path, [ComparisonRecord("f1", "a", 0.5, "b", 0.5, "P")])
    assert s["raw_edges"] == 0 and s["drops"]["ties"] == 1


def test_build_prunes_outlier(tmp_path):
    recs = [ComparisonRecord("f1", "X", 8.0, "Y", 70.0, "P"), ComparisonRecord("f1", "X", 0.5, "Z", 0.6, "P")]
    assert _build(tmp_path, recs)["pruned"] == 1
    assert _build(tmp_path, recs, "--rei-threshold", "10")["pruned"] == 0
    assert _build(tmp_path, recs, "--rei-threshold", "inf")["rei_threshold"] is None


def test_build_bad_record_file(tmp_path, capsys):
    rp = tmp_path / "r.jsonl"
    rp.write_text('{"paper_lo": "a"}\n')
    assert run("build", "--records", rp, "--out", tmp_path / "g") == 1
    assert "r.jsonl:1: missing field 'metric'" in capsys.readouterr().err


def test_rank_two_cycle(tmp_path, capsys):
    gp = tmp_path / "w.jsonl"
    dump_weighted(WeightedDigraph(frozenset("uv"), {("u", "v"): 1.0, ("v", "u"): 1.0}), gp)
    assert run("rank", "--graph", gp) == 0
    rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    scores = {r["paper_id"]: r["score"] for r in rows if "paper_id" in r}
    assert scores == pytest.approx({"u": 0.5, "v": 0.5}, abs=1e-10)
    assert rows[-1]["diagnostics"]["converged"] is True


def test_rank_empty_graph(tmp_path, capsys):
    gp = tmp_path / "w.jsonl"
    dump_weighted(WeightedDigraph(frozenset()), gp)
    assert run("rank", "--graph", gp) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 1 and "diagnostics" in lines[0]


def test_rank_matches_library(tmp_path, capsys):
    rng = np.random.default_rng(11)
    nodes = [f"n{i}" for i in range(12)]
    edges = {(a, b): float(rng.uniform(0.1, 1)) for a in nodes for b in nodes if a != b and rng.random() < 0.25}
    g = WeightedDigraph(frozenset(nodes), edges)
    gp = tmp_path / "w.jsonl"
    dump_weighted(g, gp)
    assert run("rank", "--graph", gp) == 0
    rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()[:-1]]
    assert {r["paper_id"]: r["score"] for r in rows} == pagerank(g).scores


def test_rank_improvement_graph_all_rankers(fig1_dir, tmp_path, capsys):
    run("extract", fig1_dir, "--out", tmp_path / "r.jsonl")
    run("build", "--records", tmp_path / "r.jsonl", "--out", tmp_path / "g")
    for ranker in ("pagerank", "linear", "exponential", "sink", "cocitation", "numeric"):
        assert run("rank", "--graph", tmp_path / "g" / "sanitized_graph.jsonl", "--ranker", ranker, "--format", "text") == 0
        out = capsys.readouterr().out
        assert out.split()[1] == "C" or ranker == "cocitation"


def test_unknown_ranker_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("rank", "--graph", tmp_path / "w.jsonl", "--ranker", "hits")
    assert exc.value.code == 2


def _pipeline(tmp_path, fig1_dir):
    run("extract", fig1_dir, "--out", tmp_path / "r.jsonl")
    run("build", "--records", tmp_path / "r.jsonl", "--out", tmp_path / "g")
    corpus = tmp_path / "corpus.jsonl"
    corpus.write_text("".join(
        json.dumps({"paper_id": p, "title": f"{p} for semantic segmentation", "abstract": ""}) + "\n" for p in "ABC"
    ))
    return corpus, tmp_path / "g" / "sanitized_graph.jsonl"


def test_leaderboard_text_and_json_agree(tmp_path, fig1_dir, capsys):
    corpus, graph = _pipeline(tmp_path, fig1_dir)
    base = ("leaderboard", "--query", "semantic segmentation", "--corpus", corpus, "--graph", graph)
    assert run(*base) == 0
    text = capsys.readouterr().out
    assert run(*base, "--format", "json") == 0
    rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    from_text = [(ln.split()[1], int(ln.split()[0])) for ln in text.splitlines()[2:]]
    assert from_text == [(r["paper_id"], r["rank"]) for r in rows]
    assert from_text[0] == ("C", 1)


def test_leaderboard_k1(tmp_path, fig1_dir, capsys):
    corpus, graph = _pipeline(tmp_path, fig1_dir)
    assert run("leaderboard", "--query", "segmentation", "--corpus", corpus, "--graph", graph, "--k", 1, "--format", "json") == 0
    assert len(capsys.readouterr().out.splitlines()) == 1


def test_leaderboard_config_file(tmp_path, fig1_dir, capsys):
    corpus, graph = _pipeline(tmp_path, fig1_dir)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"corpus": str(corpus), "graph": str(graph), "k": 2, "ranker": "linear"}))
    assert run("leaderboard", "--query", "segmentation", "--config", cfg, "--format", "json") == 0
    rows = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert len(rows) == 2 and rows[0]["scheme"] == "linear/SIG_AVG"


def test_config_rejects_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"alpha": 0.85}))
    with pytest.raises(ConfigError, match="alpha"):
        PipelineConfig.load(cfg)
    assert run("rank", "--graph", "x", "--config", cfg) == 1
    assert "unknown config key" in capsys.readouterr().err


def test_config_defaults():
    cfg = PipelineConfig()
    assert (cfg.rei_threshold, cfg.aggregation, cfg.dummy, cfg.ranker, cfg.k) == (1.0, "SIG_AVG", "none", "pagerank", 50)
    assert (cfg.pagerank_alpha, cfg.pagerank_tol, cfg.pagerank_max_iter) == (0.90, 1e-10, 200)
    assert PipelineConfig().updated({"rei_threshold": None}).rei_threshold is None
    with pytest.raises(ConfigError):
        PipelineConfig().updated({"rei_threshold": 0})
    with pytest.raises(ConfigError):
        PipelineConfig().updated({"aggregation": "MEAN"})


def _write_board(path, query, ids):
    path.write_text("".join(
        json.dumps({"query": query, "scheme": "x", "rank": i, "paper_id": p, "score": 1.0 / i}) + "\n"
        for i, p in enumerate(ids, 1)
    ))


def test_eval_identical_and_disjoint(tmp_path, capsys):
    lb, truth = tmp_path / "lb.jsonl", tmp_path / "t.jsonl"
    _write_board(lb, "q", ["a", "b", "c"])
    truth.write_text(json.dumps({"query": "q", "relevant": ["a", "b", "c"]}) + "\n")
    assert run("eval", "--leaderboard", lb, "--truth", truth, "--k", 10) == 0
    macro = json.loads(capsys.readouterr().out)["macro"]
    assert (macro["recall@10"], macro["ndcg@10"], macro["spearman"]) == (1.0, 1.0, pytest.approx(1.0))

    truth.write_text(json.dumps({"query": "q", "relevant": ["x", "y"]}) + "\n")
    assert run("eval", "--leaderboard", lb, "--truth", truth, "--k", 10) == 0
    row = json.loads(capsys.readouterr().out)["per_query"][0]
    assert (row["recall@10"], row["ndcg@10"]) == (0.0, 0.0) and "spearman_error" in row


def test_eval_text_and_no_match(tmp_path, capsys):
    lb, truth = tmp_path / "lb.jsonl", tmp_path / "t.jsonl"
    _write_board(lb, "q", ["a", "b"])
    truth.write_text(json.dumps({"query": "q", "relevant": ["b", "a"]}) + "\n")
    assert run("eval", "--leaderboard", lb, "--truth", truth, "--format", "text", "--k", 1, 2) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split("\t") == ["query", "metric", "recall@1", "ndcg@1", "recall@2", "ndcg@2", "spearman"]
    assert lines[-1].startswith("MACRO")
    truth.write_text(json.dumps({"query": "other", "relevant": ["a"]}) + "\n")
    assert run("eval", "--leaderboard", lb, "--truth", truth) == 1
