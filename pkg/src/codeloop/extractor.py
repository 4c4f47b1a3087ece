"""Reduce fetched pages to compact key information for prompting.

Dedicated rules cover the site kinds that dominate search results
(Q&A forums, library docs, tutorials); everything else goes through a
generic main-content rule. Every rule clips to a token budget from the
tail and never splits inside a code block.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import httpx

from .errors import ExtractError, FetchError
from .htmldoc import Node, parse_html
from .websearch import SiteCategory, SiteKind, classify_site

log = logging.getLogger(__name__)

# Crude whitespace-word estimate of model tokens; exact tokenizer parity is
# a non-goal.
TOKENS_PER_WORD = 1.3

# Answers kept per Q&A page: the accepted one plus the top-voted other.
MAX_ANSWERS = 2


def estimate_tokens(text: str) -> int:
    return _words_to_tokens(len(text.split()))


def _words_to_tokens(words: int) -> int:
    # Integer math so that summing unit word counts and measuring the joined
    # rendering agree exactly.
    return (words * 13) // 10


@dataclass(frozen=True)
class ExtractedInfo:
    source_url: str
    site: SiteKind
    title: str
    text_blocks: tuple[str, ...]
    code_blocks: tuple[str, ...]
    truncated: bool

    def rendered_size(self) -> int:
        parts = [self.title, *self.text_blocks, *self.code_blocks]
        return estimate_tokens("\n".join(parts))


def render_info(info: ExtractedInfo) -> str:
    """Source-tagged rendering used inside prompts."""
    lines = [f"[source: {info.source_url or info.site.site_id} ({info.site.kind.value})]"]
    if info.title:
        lines.append(info.title)
    lines.extend(info.text_blocks)
    for code in info.code_blocks:
        lines.append(f"```\n{code}\n```")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Fetching (record/replay corpus keyed by URL)
# ---------------------------------------------------------------------------


class PageCorpus:
    """`<dir>/manifest.json` maps URL -> HTML filename inside `<dir>`."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.manifest_path = self.directory / "manifest.json"
        self._manifest: dict[str, str] = {}
        if self.manifest_path.exists():
            self._manifest = json.loads(self.manifest_path.read_text(encoding="utf-8"))

    @staticmethod
    def filename_for(url: str) -> str:
        return hashlib.sha256(url.encode("utf-8")).hexdigest()[:16] + ".html"

    def get(self, url: str) -> str | None:
        name = self._manifest.get(url)
        if name is None:
            return None
        path = self.directory / name
        if not path.exists():
            return None
        return path.read_text(encoding="utf-8")

    def put(self, url: str, html: str) -> None:
        name = self.filename_for(url)
        self.directory.mkdir(parents=True, exist_ok=True)
        (self.directory / name).write_text(html, encoding="utf-8")
        self._manifest[url] = name
        tmp = self.manifest_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(self._manifest, ensure_ascii=False, indent=2, sort_keys=True), encoding="utf-8")
        tmp.replace(self.manifest_path)

    def urls(self) -> list[str]:
        return sorted(self._manifest)


def _default_get(url: str) -> str:
    try:
        resp = httpx.get(url, timeout=30.0, follow_redirects=True)
    except httpx.HTTPError as exc:
        raise FetchError(f"fetch failed for {url}: {exc}") from exc
    if resp.status_code != 200:
        raise FetchError(f"fetch failed for {url}: HTTP {resp.status_code}", status=resp.status_code)
    return resp.text


class PageFetcher:
    def __init__(
        self,
        mode: str = "replay",
        corpus: PageCorpus | None = None,
        http_get: Callable[[str], str] | None = None,
    ):
        if mode not in ("live", "record", "replay"):
            raise ValueError(f"unknown mode {mode!r}")
        if mode in ("record", "replay") and corpus is None:
            raise ValueError(f"{mode} mode needs a page corpus")
        self.mode = mode
        self.corpus = corpus
        self._get = http_get or _default_get

    def fetch(self, url: str) -> str:
        if self.mode == "replay":
            html = self.corpus.get(url)
            if html is None:
                raise FetchError(f"url not in fixture corpus: {url}")
            return html
        if self.mode == "record":
            html = self.corpus.get(url)
            if html is not None:
                return html
            html = self._get(url)
            self.corpus.put(url, html)
            return html
        return self._get(url)


# ---------------------------------------------------------------------------
# Per-site extraction rules
# ---------------------------------------------------------------------------

# Extraction units: ("text", str) may be clipped word-wise, ("code", str)
# is kept whole or dropped.
Unit = tuple[str, str]


def _page_title(root: Node) -> str:
    h1 = root.find("h1")
    if h1 is not None and h1.text():
        return h1.text()
    title = root.find("title")
    return title.text() if title is not None else ""


def _code_text(node: Node) -> str:
    code = node.find("code")
    target = code if code is not None else node
    return target.raw_text().strip("\n")


def _own_code_blocks(scope: Node) -> list[str]:
    blocks = []
    for pre in scope.find_all("pre"):
        text = _code_text(pre)
        if text.strip():
            blocks.append(text)
    return blocks


def _prose_text(scope: Node) -> str:
    """Paragraph text with code elements excluded."""
    parts = []
    for p in scope.find_all("p"):
        if p.has_ancestor("pre"):
            continue
        text = p.text()
        if text:
            parts.append(text)
    return "\n".join(parts)


def _answer_score(answer: Node) -> int:
    raw = answer.attrs.get("data-score")
    if raw is None:
        vote = answer.find(class_="js-vote-count")
        raw = vote.text() if vote is not None else "0"
    try:
        return int(raw.strip())
    except ValueError:
        return 0


def _is_accepted(answer: Node) -> bool:
    if "accepted-answer" in answer.classes:
        return True
    return answer.attrs.get("itemprop") == "acceptedAnswer"


def _rule_qa_forum(root: Node) -> tuple[str, list[Unit]]:
    title = _page_title(root)
    units: list[Unit] = []

    question = root.find(class_="question")
    if question is not None:
        body = question.find(class_="js-post-body") or question.find(class_="post-text") or question
        prose = _prose_text(body)
        if prose:
            units.append(("text", prose))

    answers = root.find_all(class_="answer")
    # Markup attribute first, vote count as the tiebreak fallback.
    answers.sort(key=lambda a: (not _is_accepted(a), -_answer_score(a)))
    for answer in answers[:MAX_ANSWERS]:
        body = answer.find(class_="js-post-body") or answer.find(class_="post-text") or answer
        label = "accepted answer" if _is_accepted(answer) else f"answer (score {_answer_score(answer)})"
        prose = _prose_text(body)
        units.append(("text", f"[{label}] {prose}" if prose else f"[{label}]"))
        for code in _own_code_blocks(body):
            units.append(("code", code))
    return title, units


def _rule_library_docs(root: Node) -> tuple[str, list[Unit]]:
    title = _page_title(root)
    units: list[Unit] = []

    signature = root.find("dt", class_="sig") or root.find("dt")
    if signature is not None and signature.text():
        units.append(("text", signature.text()))

    for table in root.find_all("table"):
        if "params" not in table.classes and "parameters" not in table.classes:
            continue
        for row in table.find_all("tr"):
            cells = [c.text() for c in row.find_all("td") + row.find_all("th")]
            cells = [c for c in cells if c]
            if cells:
                units.append(("text", " : ".join(cells)))
    for field_list in root.find_all("dl", class_="field-list"):
        for dt in field_list.find_all("dt"):
            dd_text = ""
            # The matching dd is the next element sibling.
            siblings = [c for c in dt.parent.children if isinstance(c, Node)] if dt.parent else []
            if dt in siblings:
                idx = siblings.index(dt)
                if idx + 1 < len(siblings) and siblings[idx + 1].tag == "dd":
                    dd_text = siblings[idx + 1].text()
            row = dt.text() if not dd_text else f"{dt.text()} : {dd_text}"
            if row:
                units.append(("text", row))

    codes = _own_code_blocks(root)
    example = next((c for c in codes if ">>>" in c), codes[0] if codes else None)
    if example is not None:
        units.append(("code", example))
    return title, units


def _rule_tutorial(root: Node) -> tuple[str, list[Unit]]:
    title = _page_title(root)
    units: list[Unit] = []
    for heading in root.find_all("h2") + root.find_all("h3"):
        text = heading.text()
        if text:
            units.append(("text", text))
    for code in _own_code_blocks(root):
        units.append(("code", code))
    return title, units


_BOILERPLATE_TAGS = {"script", "style", "nav", "header", "footer", "aside", "noscript"}


def _strip_boilerplate(root: Node) -> None:
    for node in list(root.iter_nodes()):
        node.children = [
            c for c in node.children
            if not (isinstance(c, Node) and c.tag in _BOILERPLATE_TAGS)
        ]


def _rule_generic(root: Node) -> tuple[str, list[Unit]]:
    title = _page_title(root)
    _strip_boilerplate(root)
    scope = root.find("main") or root.find("article") or root.find("body") or root
    units: list[Unit] = []
    prose = _prose_text(scope)
    if prose:
        units.append(("text", prose))
    for code in _own_code_blocks(scope):
        units.append(("code", code))
    return title, units


_RULES = {
    SiteCategory.QA_FORUM: _rule_qa_forum,
    SiteCategory.LIBRARY_DOCS: _rule_library_docs,
    SiteCategory.TUTORIAL_SITE: _rule_tutorial,
    SiteCategory.GENERIC: _rule_generic,
}


def _clip_to_budget(title: str, units: list[Unit], budget: int) -> tuple[str, list[Unit], bool]:
    """Keep a prefix of [title, *units] whose total estimate fits the budget.

    Text units may be cut word-wise at the boundary; code units are kept
    whole or dropped entirely.
    """
    kept: list[Unit] = []
    used_words = 0
    sequence: list[Unit] = list(units)
    if title:
        sequence.insert(0, ("title", title))
    out_title = ""

    for kind, content in sequence:
        words = content.split()
        if _words_to_tokens(used_words + len(words)) <= budget:
            used_words += len(words)
            if kind == "title":
                out_title = content
            else:
                kept.append((kind, content))
            continue
        if kind in ("title", "text"):
            lo, hi = 0, len(words)
            while lo < hi:  # largest word-prefix that still fits
                mid = (lo + hi + 1) // 2
                if _words_to_tokens(used_words + mid) <= budget:
                    lo = mid
                else:
                    hi = mid - 1
            if lo > 0:
                partial = " ".join(words[:lo])
                if kind == "title":
                    out_title = partial
                else:
                    kept.append(("text", partial))
        # Everything from this position on is dropped (tail clipping).
        return out_title, kept, True

    return out_title, kept, False


def extract(site: SiteKind, html: str, budget: int, url: str = "") -> ExtractedInfo:
    """Apply the site's rule, degrade to generic on trouble, clip to budget."""
    if budget <= 0:
        raise ValueError("budget must be > 0")
    rule = _RULES[site.kind]
    try:
        root = parse_html(html)
    except Exception as exc:
        raise ExtractError(f"unparseable HTML from {url or site.site_id}: {exc}") from exc

    try:
        title, units = rule(root)
    except Exception:
        log.warning("site rule %s failed for %s; falling back to generic", site.kind.value, url)
        try:
            title, units = _rule_generic(parse_html(html))
        except Exception as exc:
            raise ExtractError(f"extraction failed for {url or site.site_id}: {exc}") from exc

    title, kept, truncated = _clip_to_budget(title, units, budget)
    return ExtractedInfo(
        source_url=url,
        site=site,
        title=title,
        text_blocks=tuple(c for k, c in kept if k == "text"),
        code_blocks=tuple(c for k, c in kept if k == "code"),
        truncated=truncated,
    )


class InfoExtractor:
    """fetch + classify + extract with graceful per-hit degradation."""

    def __init__(self, fetcher: PageFetcher, budget: int):
        self.fetcher = fetcher
        self.budget = budget

    def gather(self, url: str) -> ExtractedInfo | None:
        """None when the hit can't contribute (fetch/extract failure)."""
        site = classify_site(url)
        try:
            html = self.fetcher.fetch(url)
        except FetchError as exc:
            log.warning("skipping %s: %s", url, exc)
            return None
        try:
            return extract(site, html, self.budget, url=url)
        except ExtractError as exc:
            log.warning("skipping %s: %s", url, exc)
            return None
