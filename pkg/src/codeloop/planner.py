"""Turn a problem into numbered plan steps and derive search queries.

The model replies in an enumerated-list grammar; steps worth searching for
carry a [SEARCH] marker and a query. One prompt produces plan, search
assessment, and queries in a single reply, which keeps transcripts small
and the grammar testable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import PlanParseError
from .gateway import LlmGateway
from .prompts import render
from .types import ProblemSpec, Style

# Canonical grammar: `1. [SEARCH] step text — query: the query`
# The query separator is an em-dash; en-dash and a bare ` -- ` are accepted
# because live models are sloppy about dashes.
_STEP_RE = re.compile(
    r"^\s*(\d+)\.\s*(\[SEARCH\]\s*)?(.+?)(?:\s*(?:—|–|--)\s*query:\s*(.+?)\s*)?$"
)

_DEF_RE = re.compile(r"^\s*def\s+(\w+)\s*\(", re.MULTILINE)


@dataclass(frozen=True)
class PlanStep:
    index: int
    text: str
    needs_search: bool
    query: str | None = None

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("step text must be nonempty")
        if (self.query is not None) != self.needs_search:
            raise ValueError("query present iff needs_search")


def parse_plan_reply(reply: str) -> list[PlanStep]:
    """Parse the enumerated-list grammar, tolerating surrounding prose.

    A [SEARCH] marker without an explicit query falls back to the step text
    as the query; an explicit query implies the step needs search. Indices
    are renumbered to a contiguous 1..N.
    """
    steps: list[PlanStep] = []
    for line in reply.splitlines():
        if not line.strip():
            continue
        m = _STEP_RE.match(line)
        if m is None:
            continue
        _, marker, text, query = m.groups()
        text = text.strip()
        if not text:
            continue
        needs_search = bool(marker) or query is not None
        if needs_search and query is None:
            query = text
        steps.append(
            PlanStep(
                index=len(steps) + 1,
                text=text,
                needs_search=needs_search,
                query=query.strip() if query else None,
            )
        )
    if not steps:
        raise PlanParseError("no parseable plan steps in reply", raw_reply=reply)
    return steps


def format_plan(steps: list[PlanStep]) -> str:
    """Pretty-print steps back into the grammar (parse round-trips)."""
    lines = []
    for step in steps:
        if step.needs_search:
            lines.append(f"{step.index}. [SEARCH] {step.text} — query: {step.query}")
        else:
            lines.append(f"{step.index}. {step.text}")
    return "\n".join(lines)


def select_queries(steps: list[PlanStep], n_q: int) -> list[str]:
    """Keep at most n_q queries; the first search-marked steps win."""
    queries = [s.query for s in steps if s.needs_search and s.query]
    return queries[:n_q]


def skeleton_methods(description: str) -> list[str]:
    """Target method names in a class skeleton, dunders excluded."""
    names = []
    for name in _DEF_RE.findall(description):
        if name.startswith("__") and name.endswith("__"):
            continue
        if name not in names:
            names.append(name)
    return names


def _plan_one(gateway: LlmGateway, prompt) -> list[PlanStep]:
    reply = gateway.complete(prompt, purpose="plan")
    try:
        return parse_plan_reply(reply)
    except PlanParseError:
        retry = list(prompt) + [
            {"role": "assistant", "content": reply},
            {
                "role": "user",
                "content": "That reply had no numbered steps. Reply again using only "
                "the `1. ...` format described above.",
            },
        ]
        return parse_plan_reply(gateway.complete(retry, purpose="plan-retry"))


def make_plan(problem: ProblemSpec, gateway: LlmGateway) -> list[PlanStep]:
    """Produce the plan for a problem.

    Class skeletons are planned per target method; the per-method steps are
    concatenated with a `[method]` label and renumbered.
    """
    if not problem.description:
        raise ValueError("problem description must be nonempty")

    if problem.style is Style.CLASS_SKELETON:
        methods = skeleton_methods(problem.description)
        if methods:
            combined: list[PlanStep] = []
            for method in methods:
                prompt = render("plan_method", description=problem.description, method=method)
                for step in _plan_one(gateway, prompt):
                    combined.append(
                        PlanStep(
                            index=len(combined) + 1,
                            text=f"[{method}] {step.text}",
                            needs_search=step.needs_search,
                            query=step.query,
                        )
                    )
            return combined

    prompt = render("plan_completion", description=problem.description)
    return _plan_one(gateway, prompt)
