"""Turn LaTeX ``tabular`` blocks with ``\\cite`` rows into pairwise comparison records.

Only explicit citations are understood: a row (or, in transposed tables, a
column) belongs to a paper when one of its cells carries a ``\\cite{key}``.
Column headers give the metric names.
"""

from __future__ import annotations

import enum
import itertools
import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

log = logging.getLogger(__name__)

UNKNOWN_METRIC = "unknown-metric"

_TABULAR_ENVS = ("tabular", "tabular*", "tabularx", "longtable")
# environments whose first mandatory argument is a width, before the column spec
_WIDTH_ENVS = ("tabular*", "tabularx")

_ENV_TOKEN = re.compile(r"\\(begin|end)\s*\{(" + "|".join(re.escape(e) for e in _TABULAR_ENVS) + r")\}")
_CITE = re.compile(
    r"\\(?:cite|citep|citet|citealp|citealt|citeauthor|citeyear|parencite|textcite|autocite)\*?"
    r"\s*(?:\[[^\]]*\]\s*){0,2}\{([^{}]*)\}"
)
_NUMBER = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)")
_STYLE_WRAPPERS = (
    "textbf", "textit", "emph", "underline", "mathbf", "mathit", "mathrm", "textrm",
    "bm", "boldsymbol", "textsf", "texttt",
)
_RULE_COMMANDS = (
    "hline", "toprule", "midrule", "bottomrule", "endhead", "endfirsthead", "endfoot",
    "endlastfoot", "hdashline", "centering", "small", "footnotesize", "scriptsize", "normalsize",
)
_RULE_WITH_ARGS = ("cline", "cmidrule", "addlinespace", "rowcolor", "cellcolor", "noalign", "arrayrulecolor")


class Polarity(str, enum.Enum):
    BENEFIT = "benefit"  # higher is better
    COST = "cost"  # lower is better


@dataclass(frozen=True)
class MetricSpec:
    name: str
    polarity: Polarity = Polarity.BENEFIT


DEFAULT_METRICS: dict[str, Polarity] = {
    "accuracy": Polarity.BENEFIT,
    "f1": Polarity.BENEFIT,
    "recall": Polarity.BENEFIT,
    "precision": Polarity.BENEFIT,
    "map": Polarity.BENEFIT,
    "auc": Polarity.BENEFIT,
    "bleu": Polarity.BENEFIT,
    "iou": Polarity.BENEFIT,
    "exact match": Polarity.BENEFIT,
    "time": Polarity.COST,
    "error": Polarity.COST,
    "perplexity": Polarity.COST,
    "wer": Polarity.COST,
}


@dataclass
class MetricRegistry:
    """Canonical metric names and whether larger values are better.

    Lookup is exact first; otherwise the longest registered name that occurs
    as a whole-word phrase inside the query wins ("top-1 error" -> error).
    Anything else falls back to ``default_polarity``.
    """

    entries: dict[str, MetricSpec] = field(default_factory=dict)
    default_polarity: Polarity = Polarity.BENEFIT

    @classmethod
    def default(cls) -> "MetricRegistry":
        return cls({name: MetricSpec(name, pol) for name, pol in DEFAULT_METRICS.items()})

    def add(self, name: str, polarity: Polarity | str) -> None:
        canon = normalize_metric(name)
        self.entries[canon] = MetricSpec(canon, Polarity(polarity))

    def canonical(self, raw_header: str) -> str:
        return normalize_metric(raw_header)

    def resolve(self, name: str) -> MetricSpec:
        canon = normalize_metric(name)
        if canon in self.entries:
            return self.entries[canon]
        words = f" {' '.join(re.findall(r'[a-z0-9]+', canon))} "
        hits = [n for n in self.entries if f" {n} " in words]
        if hits:
            best = min(hits, key=lambda n: (-len(n), n))
            return MetricSpec(canon, self.entries[best].polarity)
        return MetricSpec(canon, self.default_polarity)


@dataclass
class RawTable:
    paper_id: str
    cells: list[list[str]]
    caption: str | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.cells), (len(self.cells[0]) if self.cells else 0)


@dataclass(frozen=True)
class ComparisonRecord:
    metric: str
    paper_lo: str
    value_lo: float
    paper_hi: str
    value_hi: float
    reporter: str

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "paper_lo": self.paper_lo,
            "value_lo": self.value_lo,
            "paper_hi": self.paper_hi,
            "value_hi": self.value_hi,
            "reporter": self.reporter,
        }


@dataclass(frozen=True)
class ParseWarning:
    reporter: str
    offset: int
    message: str


@dataclass(frozen=True)
class PaperMeta:
    paper_id: str
    title: str
    abstract: str
    year: int | None = None


class RecordFileError(ValueError):
    def __init__(self, path, line: int, message: str, field_name: str | None = None):
        self.path = str(path)
        self.line = line
        self.field = field_name
        super().__init__(f"{path}:{line}: {message}")


# ---------------------------------------------------------------------------
# low-level LaTeX scanning


def strip_comments(source: str) -> str:
    """Drop ``%`` comments (but not ``\\%``) through end of line."""
    out = []
    for line in source.split("\n"):
        i = 0
        while i < len(line):
            ch = line[i]
            if ch == "\\":
                i += 2
                continue
            if ch == "%":
                line = line[:i]
                break
            i += 1
        out.append(line)
    return "\n".join(out)


def _group_end(s: str, i: int, open_ch: str = "{", close_ch: str = "}") -> int:
    """Index just past the balanced group opening at ``s[i]``; -1 if unbalanced."""
    if i >= len(s) or s[i] != open_ch:
        return -1
    depth = 0
    j = i
    while j < len(s):
        ch = s[j]
        if ch == "\\":
            j += 2
            continue
        if ch == open_ch:
            depth += 1
        elif ch == close_ch:
            depth -= 1
            if depth == 0:
                return j + 1
        j += 1
    return -1


def _skip_ws(s: str, i: int) -> int:
    while i < len(s) and s[i].isspace():
        i += 1
    return i


def _env_args_end(source: str, i: int, env: str) -> int:
    """Skip ``[pos]{width}{colspec}`` following ``\\begin{env}``; -1 if malformed."""
    i = _skip_ws(source, i)
    if i < len(source) and source[i] == "[":
        i = _group_end(source, i, "[", "]")
        if i < 0:
            return -1
        i = _skip_ws(source, i)
    n_groups = 2 if env in _WIDTH_ENVS else 1
    for _ in range(n_groups):
        i = _group_end(source, _skip_ws(source, i))
        if i < 0:
            return -1
    return i


def _split_top_level(body: str) -> list[list[str]]:
    """Split a tabular body into rows (``\\\\``) and cells (``&``) at brace/env depth 0."""
    rows: list[list[str]] = []
    cells: list[str] = []
    buf: list[str] = []
    depth = 0
    env_depth = 0
    i = 0
    n = len(body)
    while i < n:
        ch = body[i]
        if ch == "\\":
            if body.startswith("\\\\", i) and depth == 0 and env_depth == 0:
                cells.append("".join(buf))
                rows.append(cells)
                cells, buf = [], []
                i += 2
                i = _skip_ws(body, i)
                if i < n and body[i] == "*":
                    i += 1
                j = _skip_ws(body, i)
                if j < n and body[j] == "[":
                    end = _group_end(body, j, "[", "]")
                    if end > 0:
                        i = end
                continue
            if body.startswith("\\tabularnewline", i) and depth == 0 and env_depth == 0:
                cells.append("".join(buf))
                rows.append(cells)
                cells, buf = [], []
                i += len("\\tabularnewline")
                continue
            if body.startswith("\\begin{", i):
                env_depth += 1
            elif body.startswith("\\end{", i):
                env_depth = max(0, env_depth - 1)
            buf.append(body[i : i + 2])
            i += 2
            continue
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth = max(0, depth - 1)
        elif ch == "&" and depth == 0 and env_depth == 0:
            cells.append("".join(buf))
            buf = []
            i += 1
            continue
        buf.append(ch)
        i += 1
    tail = "".join(buf)
    if cells or tail.strip():
        cells.append(tail)
        rows.append(cells)
    return rows


def _remove_command(text: str, name: str) -> str:
    """Delete every ``\\name`` with its optional ``(..)``/``[..]`` and brace arguments."""
    pat = re.compile(r"\\" + re.escape(name) + r"(?![A-Za-z])")
    out = []
    pos = 0
    for m in pat.finditer(text):
        if m.start() < pos:
            continue
        out.append(text[pos : m.start()])
        i = m.end()
        while True:
            j = _skip_ws(text, i)
            if j < len(text) and text[j] in "([":
                close = ")" if text[j] == "(" else "]"
                end = _group_end(text, j, text[j], close)
                if end < 0:
                    break
                i = end
            elif j < len(text) and text[j] == "{":
                end = _group_end(text, j)
                if end < 0:
                    break
                i = end
            else:
                break
        pos = i
    out.append(text[pos:])
    return "".join(out)


def _clean_cell(text: str) -> str:
    for name in _RULE_WITH_ARGS:
        if "\\" + name in text:
            text = _remove_command(text, name)
    for name in _RULE_COMMANDS:
        text = re.sub(r"\\" + name + r"(?![A-Za-z])", "", text)
    return " ".join(text.split())


def _read_args(text: str, i: int, count: int) -> tuple[list[str], int] | None:
    args = []
    for _ in range(count):
        j = _skip_ws(text, i)
        if j < len(text) and text[j] == "*":
            args.append("*")
            i = j + 1
            continue
        end = _group_end(text, j)
        if end < 0:
            return None
        args.append(text[j + 1 : end - 1])
        i = end
    return args, i


def _expand_cell(text: str) -> list[str]:
    """Expand ``\\multicolumn{n}{..}{x}`` into ``[x, '', ...]``; unwrap ``\\multirow``."""
    text = text.strip()
    if text.startswith("\\multicolumn"):
        parsed = _read_args(text, len("\\multicolumn"), 3)
        if parsed is not None:
            (span, _spec, content), end = parsed
            try:
                n = max(1, int(span.strip()))
            except ValueError:
                n = 1
            rest = text[end:].strip()
            inner = _expand_cell(" ".join(filter(None, (content, rest))))[0]
            return [inner] + [""] * (n - 1)
    if text.startswith("\\multirow"):
        parsed = _read_args(text, len("\\multirow"), 3)
        if parsed is not None:
            (_n, _width, content), end = parsed
            rest = text[end:].strip()
            return [" ".join(filter(None, (content.strip(), rest)))]
    return [text]


def _caption_for(source: str, start: int, end: int) -> str | None:
    """Caption of the ``table`` float enclosing ``source[start:end]``, if any."""
    opening = source.rfind("\\begin{table", 0, start)
    if opening < 0:
        return None
    closing = source.find("\\end{table", end)
    if closing < 0 or source.rfind("\\end{table", opening, start) >= 0:
        return None
    region = source[opening:closing]
    k = region.find("\\caption")
    if k < 0:
        return None
    j = _skip_ws(region, k + len("\\caption"))
    if j < len(region) and region[j] == "[":
        j = _skip_ws(region, _group_end(region, j, "[", "]"))
    stop = _group_end(region, j)
    if stop < 0:
        return None
    return " ".join(region[j + 1 : stop - 1].split())


# ---------------------------------------------------------------------------
# public operations


def parse_tabular(
    latex_source: str, reporter: str, warnings: list[ParseWarning] | None = None
) -> list[RawTable]:
    """One :class:`RawTable` per top-level tabular block, in document order.

    Unbalanced blocks are skipped and described in ``warnings`` when a list is
    passed in; parsing never raises on bad input.
    """
    if not reporter:
        raise ValueError("reporter paper id must be non-empty")
    source = strip_comments(latex_source)
    tokens = list(_ENV_TOKEN.finditer(source))

    def warn(offset: int, message: str) -> None:
        log.warning("%s@%d: %s", reporter, offset, message)
        if warnings is not None:
            warnings.append(ParseWarning(reporter, offset, message))

    tables: list[RawTable] = []
    k = 0
    while k < len(tokens):
        tok = tokens[k]
        kind, env = tok.group(1), tok.group(2)
        if kind == "end":
            warn(tok.start(), f"stray \\end{{{env}}}")
            k += 1
            continue
        depth = 0
        match = None
        for m in range(k, len(tokens)):
            depth += 1 if tokens[m].group(1) == "begin" else -1
            if depth == 0:
                match = m
                break
        if match is None or tokens[match].group(2) != env:
            warn(tok.start(), f"unbalanced \\begin{{{env}}}; block skipped")
            k += 1
            continue
        body_start = _env_args_end(source, tok.end(), env)
        close = tokens[match]
        if body_start < 0 or body_start > close.start():
            warn(tok.start(), f"malformed arguments to \\begin{{{env}}}; block skipped")
            k = match + 1
            continue
        grid = []
        for row in _split_top_level(source[body_start : close.start()]):
            expanded: list[str] = []
            for cell in row:
                expanded.extend(_expand_cell(_clean_cell(cell)))
            if any(c for c in expanded):
                grid.append(expanded)
        width = max((len(r) for r in grid), default=0)
        for r in grid:
            r.extend([""] * (width - len(r)))
        tables.append(RawTable(reporter, grid, _caption_for(source, tok.start(), close.end())))
        k = match + 1
    return tables


def cite_keys(cell: str) -> list[str]:
    keys = []
    for m in _CITE.finditer(cell):
        keys.extend(k.strip() for k in m.group(1).split(",") if k.strip())
    return keys


def _unwrap_style(text: str) -> str:
    changed = True
    while changed:
        changed = False
        for name in _STYLE_WRAPPERS:
            prefix = "\\" + name
            if text.startswith(prefix):
                j = _skip_ws(text, len(prefix))
                if _group_end(text, j) == len(text):
                    text = text[j + 1 : -1].strip()
                    changed = True
        m = re.fullmatch(r"\{\\(?:bf|it|em|bfseries|itshape)\s+(.*)\}", text, re.S)
        if m:
            text = m.group(1).strip()
            changed = True
    return text


def parse_number(cell: str) -> float | None:
    """Numeric value of a cell, or None.

    Accepts an optional sign, decimals, a trailing percent sign (value kept on
    its raw scale), ``$..$`` math and bold/italic/underline wrappers.
    """
    text = _unwrap_style(cell.strip())
    if "$" in text:
        text = _unwrap_style(text.replace("$", "").strip())
    text = text.replace("\\%", "%").replace("\u2212", "-").replace("\\,", "").strip()
    if text.endswith("%"):
        text = text[:-1].rstrip()
    if not _NUMBER.fullmatch(text):
        return None
    value = float(text)
    return value if math.isfinite(value) else None


def normalize_metric(raw_header: str) -> str:
    """Canonical metric name: lowercase, markup stripped, whitespace collapsed."""
    text = raw_header.lower()
    text = re.sub(r"\\([%&_#$])", r"\1", text)
    text = text.replace("$", "").replace("~", " ")
    text = re.sub(r"\\[a-z@]+\*?", " ", text)
    text = re.sub(r"\\.", " ", text)
    text = text.replace("{", "").replace("}", "")
    text = " ".join(text.split())
    text = text.strip(" .,;:*^_|").strip()
    return text or UNKNOWN_METRIC


def _transpose(cells: Sequence[Sequence[str]]) -> list[list[str]]:
    return [list(col) for col in zip(*cells)]


def extract_comparisons(
    table: RawTable,
    registry: MetricRegistry | None = None,
    key_map: Mapping[str, str] | None = None,
) -> list[ComparisonRecord]:
    """All pairwise comparisons a table makes between cited papers.

    ``key_map`` translates citation keys into paper ids; unmapped keys are
    used verbatim.
    """
    registry = registry or MetricRegistry.default()
    grid = [list(r) for r in table.cells]
    if not grid:
        return []
    rows_cited = sum(1 for r in grid if any(cite_keys(c) for c in r))
    if rows_cited == 0:
        return []
    cols_cited = sum(1 for col in _transpose(grid) if any(cite_keys(c) for c in col))
    if cols_cited > rows_cited:
        grid = _transpose(grid)

    # (row index, paper id, label column) for the first row citing each paper
    entries: list[tuple[int, str, int]] = []
    seen: set[str] = set()
    for i, row in enumerate(grid):
        for j, cell in enumerate(row):
            keys = cite_keys(cell)
            if keys:
                paper = key_map.get(keys[0], keys[0]) if key_map else keys[0]
                if paper not in seen:
                    seen.add(paper)
                    entries.append((i, paper, j))
                break
    if len(entries) < 2:
        return []

    cited_rows = {i for i, _, _ in entries}
    first = entries[0][0]
    label_cols = {j for _, _, j in entries}
    width = len(grid[0])
    records = []
    for col in range(width):
        if col in label_cols:
            continue
        header = ""
        for i in range(first - 1, -1, -1):
            if i not in cited_rows and grid[i][col].strip():
                header = grid[i][col]
                break
        metric = registry.canonical(header)
        values = []
        for i, paper, _ in entries:
            v = parse_number(grid[i][col])
            if v is not None:
                values.append((paper, v))
        for (pa, va), (pb, vb) in itertools.combinations(values, 2):
            if va == vb:
                continue
            if va > vb:
                (pa, va), (pb, vb) = (pb, vb), (pa, va)
            records.append(ComparisonRecord(metric, pa, va, pb, vb, table.paper_id))
    return records


def extract_document(
    latex_source: str,
    reporter: str,
    registry: MetricRegistry | None = None,
    warnings: list[ParseWarning] | None = None,
) -> list[ComparisonRecord]:
    records = []
    for table in parse_tabular(latex_source, reporter, warnings):
        records.extend(extract_comparisons(table, registry))
    return records


# ---------------------------------------------------------------------------
# record and corpus files

_RECORD_FIELDS = ("metric", "paper_lo", "value_lo", "paper_hi", "value_hi", "reporter")


def dump_record(record: ComparisonRecord) -> str:
    return json.dumps(record.to_dict(), ensure_ascii=False)


def save_records(records: Iterable[ComparisonRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(dump_record(rec) + "\n")


def _parse_record(obj, path, lineno: int) -> ComparisonRecord:
    if not isinstance(obj, dict):
        raise RecordFileError(path, lineno, "expected a JSON object")
    for name in _RECORD_FIELDS:
        if name not in obj:
            raise RecordFileError(path, lineno, f"missing field {name!r}", name)
    for name in ("metric", "paper_lo", "paper_hi", "reporter"):
        if not isinstance(obj[name], str):
            raise RecordFileError(path, lineno, f"field {name!r} must be a string", name)
    values = {}
    for name in ("value_lo", "value_hi"):
        v = obj[name]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise RecordFileError(path, lineno, f"field {name!r} must be a finite number", name)
        values[name] = float(v)
    return ComparisonRecord(
        obj["metric"], obj["paper_lo"], values["value_lo"], obj["paper_hi"], values["value_hi"], obj["reporter"]
    )


def load_records(path) -> list[ComparisonRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordFileError(path, lineno, f"malformed JSON ({exc.msg})") from None
            records.append(_parse_record(obj, path, lineno))
    return records


def load_corpus(path) -> list[PaperMeta]:
    papers = []
    ids = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordFileError(path, lineno, f"malformed JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise RecordFileError(path, lineno, "expected a JSON object")
            for name in ("paper_id", "title"):
                if name not in obj:
                    raise RecordFileError(path, lineno, f"missing field {name!r}", name)
            pid = str(obj["paper_id"])
            if pid in ids:
                raise RecordFileError(path, lineno, f"duplicate paper_id {pid!r}", "paper_id")
            ids.add(pid)
            year = obj.get("year")
            papers.append(
                PaperMeta(pid, str(obj["title"]), str(obj.get("abstract") or ""), int(year) if year is not None else None)
            )
    return papers


def save_corpus(papers: Iterable[PaperMeta], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in papers:
            obj = {"paper_id": p.paper_id, "title": p.title, "abstract": p.abstract, "year": p.year}
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def tex_files(directory) -> list[Path]:
    return sorted(p for p in Path(directory).rglob("*.tex") if p.is_file())
