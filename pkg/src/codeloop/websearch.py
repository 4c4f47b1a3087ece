"""Query a web-search endpoint, classify result hosts, and cache results.

Live result ordering is whatever the backend returns; replaying the cache
is the reproducibility contract. The cache file maps normalized query to
an ordered URL list; n_u truncates at read time.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable
from urllib.parse import urlsplit

import httpx

from .errors import SearchUnavailable

log = logging.getLogger(__name__)


class SiteCategory(str, Enum):
    QA_FORUM = "qa_forum"
    LIBRARY_DOCS = "library_docs"
    TUTORIAL_SITE = "tutorial_site"
    GENERIC = "generic"


@dataclass(frozen=True)
class SiteKind:
    kind: SiteCategory
    site_id: str


@dataclass(frozen=True)
class SearchHit:
    query: str
    url: str
    rank: int


# The handful of hosts that dominate search results for data-science coding
# questions get dedicated extraction rules; everything else is generic.
_KNOWN_SITES: dict[str, SiteCategory] = {
    "stackoverflow.com": SiteCategory.QA_FORUM,
    "numpy.org": SiteCategory.LIBRARY_DOCS,
    "pandas.pydata.org": SiteCategory.LIBRARY_DOCS,
    "docs.scipy.org": SiteCategory.LIBRARY_DOCS,
    "matplotlib.org": SiteCategory.LIBRARY_DOCS,
    "tensorflow.org": SiteCategory.LIBRARY_DOCS,
    "scikit-learn.org": SiteCategory.LIBRARY_DOCS,
    "geeksforgeeks.org": SiteCategory.TUTORIAL_SITE,
}


def classify_site(url: str) -> SiteKind:
    """Total function of the URL host; subdomains inherit the parent's kind."""
    host = (urlsplit(url).netloc or "").split("@")[-1].split(":")[0].lower()
    for site, kind in _KNOWN_SITES.items():
        if host == site or host.endswith("." + site):
            return SiteKind(kind=kind, site_id=site)
    site_id = host[4:] if host.startswith("www.") else host
    return SiteKind(kind=SiteCategory.GENERIC, site_id=site_id)


def normalize_query(query: str) -> str:
    return re.sub(r"\s+", " ", query.strip()).lower()


_PATH_RE = re.compile(r"(?:[A-Za-z]:)?[/\\][\w.\-/\\]+")


def error_search_query(error_text: str) -> str:
    """Reduce a runner error to a searchable query.

    Keeps the final exception line and strips filesystem paths: raw
    tracebacks carry machine-local noise that poisons search relevance.
    """
    lines = [ln.strip() for ln in error_text.strip().splitlines() if ln.strip()]
    last = lines[-1] if lines else ""
    return re.sub(r"\s+", " ", _PATH_RE.sub("", last)).strip()


class SearchCache:
    """normalized query -> ordered URL list, persisted as one JSON file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._entries: dict[str, list[str]] = {}
        if self.path.exists():
            self._entries = {k: list(v) for k, v in json.loads(self.path.read_text(encoding="utf-8")).items()}

    def get(self, query: str) -> list[str] | None:
        urls = self._entries.get(normalize_query(query))
        return list(urls) if urls is not None else None

    def put(self, query: str, urls: list[str]) -> None:
        self._entries[normalize_query(query)] = list(urls)

    def save(self) -> None:
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        tmp.write_text(json.dumps(self._entries, ensure_ascii=False, indent=2, sort_keys=True), encoding="utf-8")
        tmp.replace(self.path)


def _default_backend(query: str, n: int) -> list[str]:
    endpoint = os.environ.get("SEARCH_ENDPOINT", "")
    if not endpoint:
        raise SearchUnavailable("no search endpoint configured (set SEARCH_ENDPOINT)")
    headers = {}
    api_key = os.environ.get("SEARCH_API_KEY", "")
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    resp = httpx.get(endpoint, params={"q": query, "n": n}, headers=headers, timeout=30.0)
    resp.raise_for_status()
    return [r["url"] for r in resp.json().get("results", [])][:n]


class SearchClient:
    """Mode-aware search with per-query request coalescing.

    Safe to share across workers: the cache is lock-guarded and at most one
    live request is in flight per distinct normalized query.
    """

    def __init__(
        self,
        mode: str = "replay",
        cache: SearchCache | None = None,
        backend: Callable[[str, int], list[str]] | None = None,
        max_attempts: int = 3,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if mode not in ("live", "record", "replay"):
            raise ValueError(f"unknown mode {mode!r}")
        if mode in ("record", "replay") and cache is None:
            raise ValueError(f"{mode} mode needs a cache")
        self.mode = mode
        self.cache = cache
        self._backend = backend or _default_backend
        self._max_attempts = max_attempts
        self._sleep = sleep
        self._master_lock = threading.Lock()
        self._query_locks: dict[str, threading.Lock] = {}

    def _lock_for(self, key: str) -> threading.Lock:
        with self._master_lock:
            if key not in self._query_locks:
                self._query_locks[key] = threading.Lock()
            return self._query_locks[key]

    def search(self, query: str, n_u: int) -> list[SearchHit]:
        """Return at most n_u rank-ordered hits for a query."""
        if not query.strip():
            raise ValueError("query must be nonempty")
        if n_u < 1:
            raise ValueError("n_u must be >= 1")
        key = normalize_query(query)

        if self.mode == "replay":
            urls = self.cache.get(key)
            if urls is None:
                raise SearchUnavailable(f"query not in search cache: {key!r}")
            return self._hits(query, urls[:n_u])

        with self._lock_for(key):
            if self.mode == "record":
                with self._master_lock:
                    cached = self.cache.get(key)
                if cached is not None and len(cached) >= n_u:
                    return self._hits(query, cached[:n_u])
            urls = self._search_live(key, n_u)
            if self.cache is not None:
                with self._master_lock:
                    self.cache.put(key, urls)
                    self.cache.save()
        return self._hits(query, urls[:n_u])

    def _search_live(self, query: str, n_u: int) -> list[str]:
        last_error: Exception | None = None
        for attempt in range(1, self._max_attempts + 1):
            try:
                return list(self._backend(query, n_u))
            except SearchUnavailable:
                raise
            except Exception as exc:  # noqa: BLE001 - degrade, don't crash the run
                last_error = exc
                log.warning("search failed attempt=%d query=%r: %s", attempt, query, exc)
                if attempt < self._max_attempts:
                    self._sleep(0.5 * (2 ** (attempt - 1)))
        raise SearchUnavailable(f"search backend failed after {self._max_attempts} attempts: {last_error}")

    @staticmethod
    def _hits(query: str, urls: list[str]) -> list[SearchHit]:
        return [SearchHit(query=query, url=url, rank=i + 1) for i, url in enumerate(urls)]
