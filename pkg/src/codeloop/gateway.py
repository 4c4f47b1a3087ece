"""Access to a chat-completion model with deterministic record/replay.

Live mode POSTs to a chat-completions-style endpoint; record mode does the
same and persists digest -> reply; replay mode answers from the transcript
and never touches the network. Replay is the reproducibility contract for
the whole pipeline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import httpx

from .errors import MissingTranscript, UpstreamError

log = logging.getLogger(__name__)

Prompt = Sequence[dict[str, str]]  # [{"role": ..., "content": ...}, ...]

DEFAULT_TEMPERATURE = 0.0
DEFAULT_TOP_P = 0.95
DEFAULT_MAX_TOKENS = 1024
DEFAULT_RETRIES = 3


@dataclass(frozen=True)
class LlmConfig:
    model_name: str = "gpt-4"
    temperature: float = DEFAULT_TEMPERATURE
    top_p: float = DEFAULT_TOP_P
    max_tokens: int = DEFAULT_MAX_TOKENS
    endpoint: str = ""
    mode: str = "replay"  # live | record | replay
    max_attempts: int = DEFAULT_RETRIES
    backoff_base: float = 0.5

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not (0 < self.top_p <= 1):
            raise ValueError("top_p must be in (0, 1]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be > 0")
        if self.mode not in ("live", "record", "replay"):
            raise ValueError(f"unknown mode {self.mode!r}")


def digest(prompt: Prompt) -> str:
    """Stable content hash of the fully rendered prompt.

    Whitespace-significant by design: editing a template invalidates old
    transcripts instead of silently replaying stale replies.
    """
    canonical = json.dumps(
        [{"role": m["role"], "content": m["content"]} for m in prompt],
        ensure_ascii=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class Transcript:
    """digest -> reply store backed by a single JSON file."""

    def __init__(self, path: str | Path, meta: dict | None = None):
        self.path = Path(path)
        self.meta = meta or {}
        self.entries: dict[str, str] = {}
        if self.path.exists():
            raw = json.loads(self.path.read_text(encoding="utf-8"))
            self.entries = dict(raw.get("entries", {}))
            self.meta = raw.get("meta", self.meta)

    def get(self, key: str) -> str | None:
        return self.entries.get(key)

    def put(self, key: str, reply: str) -> None:
        self.entries[key] = reply

    def save(self) -> None:
        payload = {"meta": self.meta, "entries": self.entries}
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        tmp.write_text(json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True), encoding="utf-8")
        tmp.replace(self.path)


def _default_send(request: dict, endpoint: str, api_key: str, timeout: float) -> str:
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    resp = httpx.post(endpoint, json=request, headers=headers, timeout=timeout)
    resp.raise_for_status()
    return resp.json()["choices"][0]["message"]["content"]


class LlmGateway:
    """Shareable across workers: replay is read-only, record locks writes.

    ``send`` is the network edge, injectable so record-mode fixtures and
    retry tests can script the upstream without a server.
    """

    def __init__(
        self,
        cfg: LlmConfig,
        transcript: Transcript | None = None,
        send: Callable[[dict], str] | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if cfg.mode in ("record", "replay") and transcript is None:
            raise ValueError(f"{cfg.mode} mode needs a transcript")
        self.cfg = cfg
        self.transcript = transcript
        self._send = send
        self._sleep = sleep
        self._lock = threading.Lock()
        self.prompt_log: list[Prompt] = []

    def complete(self, prompt: Prompt, purpose: str = "") -> str:
        """Return the model reply for a rendered prompt.

        Raises MissingTranscript on a replay miss and UpstreamError once
        retries are exhausted in live/record mode.
        """
        if not prompt:
            raise ValueError("prompt must be nonempty")
        with self._lock:
            self.prompt_log.append(tuple(dict(m) for m in prompt))
        key = digest(prompt)

        if self.cfg.mode == "replay":
            reply = self.transcript.get(key)
            if reply is None:
                raise MissingTranscript(key)
            return reply

        if self.cfg.mode == "record":
            with self._lock:
                cached = self.transcript.get(key)
            if cached is not None:
                return cached

        reply = self._call_upstream(prompt, purpose)

        if self.cfg.mode == "record":
            with self._lock:
                self.transcript.put(key, reply)
                self.transcript.save()
        return reply

    def _call_upstream(self, prompt: Prompt, purpose: str) -> str:
        request = {
            "model": self.cfg.model_name,
            "messages": [dict(m) for m in prompt],
            "temperature": self.cfg.temperature,
            "top_p": self.cfg.top_p,
            "max_tokens": self.cfg.max_tokens,
        }
        send = self._send
        if send is None:
            endpoint = self.cfg.endpoint or os.environ.get("LLM_ENDPOINT", "")
            if not endpoint:
                raise UpstreamError("no endpoint configured (set LLM_ENDPOINT or LlmConfig.endpoint)")
            api_key = os.environ.get("LLM_API_KEY", "")
            send = lambda req: _default_send(req, endpoint, api_key, timeout=60.0)

        last_error: Exception | None = None
        for attempt in range(1, self.cfg.max_attempts + 1):
            try:
                reply = send(request)
                log.info("llm call ok purpose=%s attempt=%d", purpose, attempt)
                return reply
            except Exception as exc:  # noqa: BLE001 - retry any transport failure
                last_error = exc
                log.warning("llm call failed purpose=%s attempt=%d: %s", purpose, attempt, exc)
                if attempt < self.cfg.max_attempts:
                    self._sleep(self.cfg.backoff_base * (2 ** (attempt - 1)))
        raise UpstreamError(
            f"upstream failed after {self.cfg.max_attempts} attempts: {last_error}"
        ) from last_error
