from __future__ import annotations

import json
from pathlib import Path

import pytest

from codeloop.gateway import LlmConfig, LlmGateway, Transcript, digest

FIXTURES = Path(__file__).parent / "fixtures"


def write_jsonl(path: Path, records: list[dict]) -> Path:
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")
    return path


def replay_gateway(tmp_path: Path, entries: dict[str, str]) -> LlmGateway:
    """Gateway replaying a digest->reply table."""
    transcript = Transcript(tmp_path / "transcript.json")
    for key, reply in entries.items():
        transcript.put(key, reply)
    return LlmGateway(LlmConfig(mode="replay"), transcript)


def scripted_gateway(tmp_path: Path, script) -> LlmGateway:
    """Record-mode gateway whose upstream is a prompt->reply function."""
    transcript = Transcript(tmp_path / "transcript.json")
    return LlmGateway(
        LlmConfig(mode="record"),
        transcript,
        send=lambda request: script(request["messages"]),
    )


def reply_for(prompt, reply: str) -> dict[str, str]:
    return {digest(prompt): reply}


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES
