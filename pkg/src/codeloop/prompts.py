"""Prompt templates as versioned text assets.

Each template's id is its name plus a short content hash, recorded in run
manifests so a transcript can be traced back to the exact template text.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache
from pathlib import Path

_PROMPTS_DIR = Path(__file__).parent / "prompts"

SYSTEM_PROMPT = "You are an expert Python programmer. Follow the reply format exactly."

# Literal token a refine reply may use instead of code to assert the
# current candidate needs no change.
VERDICT_TOKEN = "CODE_IS_CORRECT"

TEMPLATE_NAMES = (
    "plan_completion",
    "plan_method",
    "generate",
    "testgen",
    "refine",
    "selfcheck",
)


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    path = _PROMPTS_DIR / f"{name}.txt"
    if not path.exists():
        raise FileNotFoundError(f"prompt template not found: {path}")
    return path.read_text(encoding="utf-8")


def template_id(name: str) -> str:
    text = load_template(name)
    return f"{name}@{hashlib.sha256(text.encode('utf-8')).hexdigest()[:8]}"


def template_ids() -> dict[str, str]:
    return {name: template_id(name) for name in TEMPLATE_NAMES}


def render(name: str, **variables: str) -> list[dict[str, str]]:
    """Render a template into a two-turn chat prompt."""
    body = load_template(name).format(**variables)
    return [
        {"role": "system", "content": SYSTEM_PROMPT},
        {"role": "user", "content": body},
    ]
