"""Deterministic local tools good enough to drive offline task fixtures."""

from __future__ import annotations

import csv
import io
import json
import re
import zipfile
from pathlib import Path, PurePosixPath
from typing import Any

from kgagent.llm.types import ChatRequest
from kgagent.script import ScriptError, ScriptSyntaxError, eval_math, format_result, parse_program, run_program
from kgagent.tools.registry import ArgSpec, ToolContext, ToolError, ToolOutput, ToolRegistry, ToolSpec

TEXT_SUFFIXES = frozenset({
    ".txt", ".md", ".csv", ".tsv", ".json", ".jsonl", ".log", ".xml", ".html", ".htm",
    ".py", ".cpp", ".c", ".h", ".java", ".js", ".yaml", ".yml", ".ini", ".cfg",
})


def _inside(root: Path, candidate: str) -> Path:
    root = root.resolve()
    path = (root / candidate).resolve()
    if path != root and root not in path.parents:
        raise ToolError(f"path {candidate!r} is outside the fixture root")
    return path


# -- calculator ---------------------------------------------------------------

CALCULATOR = ToolSpec(
    "calculator",
    "Evaluates an arithmetic expression such as '23 + 42', or a short graph script made of "
    "'let name = expr;' steps ending in 'let result = ...'. Returns the value as text.",
    {"expression": ArgSpec("string", "expression or script to evaluate")},
)


def calculator(args: dict[str, Any], ctx: ToolContext) -> str:
    text = args["expression"].strip()
    try:
        if re.match(r"let\b", text):
            value = run_program(parse_program(text), None)
        else:
            value = eval_math(text)
    except (ScriptError, ScriptSyntaxError) as exc:
        raise ToolError(str(exc)) from exc
    return format_result(value)


# -- text inspector -------------------------------------------------------------

TEXT_INSPECTOR = ToolSpec(
    "text_inspector",
    "Reads a local text file (plain text, markdown, source code, JSON or CSV) from the task "
    "attachments and returns its content. CSV and TSV files are rendered as a pipe table.",
    {
        "path": ArgSpec("string", "file path relative to the attachment directory"),
        "question": ArgSpec("string", "what to look for (informational)", required=False),
    },
)


def table_markdown(rows: list[list[str]]) -> str:
    if not rows:
        return ""
    width = max(len(r) for r in rows)
    rows = [r + [""] * (width - len(r)) for r in rows]

    def line(cells: list[str]) -> str:
        return "| " + " | ".join(c.replace("|", "\\|").replace("\n", " ") for c in cells) + " |"

    out = [line(rows[0]), "|" + "|".join(["---"] * width) + "|"]
    out.extend(line(r) for r in rows[1:])
    return "\n".join(out)


def text_inspector(args: dict[str, Any], ctx: ToolContext) -> ToolOutput:
    path = _inside(ctx.fixture_root, args["path"])
    if not path.is_file():
        raise ToolError(f"no such file: {args['path']}")
    suffix = path.suffix.lower()
    if suffix not in TEXT_SUFFIXES:
        raise ToolError(f"unsupported file type {suffix or '(none)'!r}")
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ToolError(f"{args['path']} is not UTF-8 text") from exc
    if suffix in (".csv", ".tsv"):
        rows = list(csv.reader(io.StringIO(text), delimiter="\t" if suffix == ".tsv" else ","))
        return ToolOutput(table_markdown(rows), {"path": args["path"], "rows": max(0, len(rows) - 1)})
    return ToolOutput(text, {"path": args["path"], "chars": len(text)})


# -- archive extraction -----------------------------------------------------------

ARCHIVE_EXTRACT = ToolSpec(
    "archive_extract",
    "Unpacks a ZIP archive from the task attachments into a private scratch directory and "
    "returns the entry listing together with the content of each text entry.",
    {"path": ArgSpec("string", "ZIP file path relative to the attachment directory")},
)


def _safe_entry(name: str) -> bool:
    if not name or name.startswith(("/", "\\")) or re.match(r"[A-Za-z]:", name):
        return False
    parts = PurePosixPath(name.replace("\\", "/")).parts
    return ".." not in parts


def archive_extract(args: dict[str, Any], ctx: ToolContext) -> ToolOutput:
    path = _inside(ctx.fixture_root, args["path"])
    if not path.is_file():
        raise ToolError(f"no such file: {args['path']}")
    if ctx.scratch_dir is None:
        raise ToolError("no scratch directory configured for this task")
    try:
        with zipfile.ZipFile(path) as zf:
            infos = zf.infolist()
            bad = [i.filename for i in infos if not _safe_entry(i.filename)]
            if bad:
                raise ToolError(f"archive entry escapes the extraction directory: {bad[0]!r}")
            target = Path(ctx.scratch_dir) / "extract" / path.stem
            target.mkdir(parents=True, exist_ok=True)
            listing, texts = [], {}
            for info in infos:
                if info.is_dir():
                    continue
                data = zf.read(info)
                dest = target / info.filename
                dest.parent.mkdir(parents=True, exist_ok=True)
                dest.write_bytes(data)
                listing.append(info.filename)
                if PurePosixPath(info.filename).suffix.lower() in TEXT_SUFFIXES:
                    try:
                        texts[info.filename] = data.decode("utf-8")
                    except UnicodeDecodeError:
                        pass
    except zipfile.BadZipFile as exc:
        raise ToolError(f"corrupt archive {args['path']}: {exc}") from exc
    lines = [f"{len(listing)} entries"] + [f"- {name}" for name in listing]
    for name, text in texts.items():
        lines += ["", f"== {name} ==", text]
    return ToolOutput("\n".join(lines), {"entries": listing, "directory": str(target)})


# -- search and page fetch over a local corpus -----------------------------------------

SEARCH = ToolSpec(
    "search",
    "Searches the offline document corpus and returns ranked result snippets with titles "
    "and URLs. Use short keyword queries.",
    {"query": ArgSpec("string", "search keywords")},
)

FETCH_PAGE = ToolSpec(
    "fetch_page",
    "Returns the full text of a page from the offline corpus, addressed by URL as shown in "
    "search results.",
    {"url": ArgSpec("string", "page URL")},
)

_WORD = re.compile(r"[a-z0-9]+")


def _words(text: str) -> set[str]:
    return set(_WORD.findall(text.lower()))


def load_corpus(path: str | Path | None) -> dict[str, Any]:
    """Corpus JSON: ``{"search": {pattern: [doc, ...]}, "pages": {url: text}}``.

    A plain ``{pattern: [doc, ...]}`` mapping is accepted as search-only.
    """
    if path is None:
        return {"search": {}, "pages": {}}
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if "search" not in data and "pages" not in data:
        data = {"search": data}
    return {"search": data.get("search", {}), "pages": data.get("pages", {})}


def search_corpus(corpus: dict[str, Any], query: str) -> list[dict[str, Any]]:
    """Documents whose pattern words all occur in the query.

    Ranked by number of pattern words (more specific first), then pattern
    text, then corpus order; duplicates by URL are dropped.
    """
    q = _words(query)
    hits = []
    for pattern, docs in corpus.get("search", {}).items():
        words = _words(pattern)
        if words and words <= q:
            hits.append((-len(words), pattern, docs))
    hits.sort(key=lambda h: (h[0], h[1]))
    out, seen = [], set()
    for _, _, docs in hits:
        for doc in docs:
            key = doc.get("url") or doc.get("title") or json.dumps(doc, sort_keys=True)
            if key not in seen:
                seen.add(key)
                out.append(doc)
    return out


def search(args: dict[str, Any], ctx: ToolContext) -> ToolOutput:
    docs = search_corpus(ctx.corpus, args["query"])
    lines = []
    for i, doc in enumerate(docs, 1):
        lines.append(f"{i}. {doc.get('title', '')} ({doc.get('url', '')})\n   {doc.get('snippet', '')}")
    return ToolOutput("\n".join(lines) if lines else "No results.", docs)


def fetch_page(args: dict[str, Any], ctx: ToolContext) -> str:
    pages = ctx.corpus.get("pages", {})
    if args["url"] not in pages:
        raise ToolError(f"page not found: {args['url']}")
    return pages[args["url"]]


# -- free-form model question ------------------------------------------------------------

LLM_QUERY = ToolSpec(
    "llm_query",
    "Asks a language model a self-contained question, for general knowledge or reasoning "
    "that needs no external lookup.",
    {"question": ArgSpec("string", "the question to ask")},
)


def llm_query(args: dict[str, Any], ctx: ToolContext) -> str:
    if ctx.gateway is None:
        raise ToolError("no language model configured")
    response = ctx.gateway.complete(ChatRequest.user(args["question"], tag="llm_tool", model=ctx.model))
    if not response.text.strip():
        raise ToolError("the model returned an empty answer")
    return response.text


BUILTINS = [
    (CALCULATOR, calculator),
    (TEXT_INSPECTOR, text_inspector),
    (ARCHIVE_EXTRACT, archive_extract),
    (SEARCH, search),
    (FETCH_PAGE, fetch_page),
    (LLM_QUERY, llm_query),
]


def builtin_registry() -> ToolRegistry:
    registry = ToolRegistry()
    for spec, behavior in BUILTINS:
        registry.register(spec, behavior)
    return registry
