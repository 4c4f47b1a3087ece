"""Generate the initial candidate and the test-case inputs.

Test inputs are plain data-construction snippets: they must run standalone,
without the candidate, so each one is smoke-executed in the sandbox before
it is allowed into the refinement loop.
"""

from __future__ import annotations

import logging
import re

from .bridge import ExecBridge, TestCaseInput
from .errors import GenerationError, NoCodeFound, TestGenError
from .extractor import ExtractedInfo, render_info
from .gateway import LlmGateway, digest
from .prompts import render
from .types import CodeCandidate, PipelineConfig, ProblemSpec, Provenance

log = logging.getLogger(__name__)

_FENCE_RE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)
_CODE_START_RE = re.compile(
    r"^\s*(?:import\s|from\s+\w|def\s|class\s|@\w|[\w.\[\]'\"]+(?:\s*,\s*[\w.\[\]'\"]+)*\s*=[^=])"
)


def parse_code_fence(reply: str) -> str:
    """First fenced block; else the longest code-looking suffix."""
    m = _FENCE_RE.search(reply)
    if m:
        code = m.group(1).strip("\n")
        if code.strip():
            return code
    lines = reply.splitlines()
    for i, line in enumerate(lines):
        if _CODE_START_RE.match(line):
            return "\n".join(lines[i:]).strip("\n")
    raise NoCodeFound("reply contains no fenced block and nothing code-like")


def parse_all_code_fences(reply: str) -> list[str]:
    return [m.group(1).strip("\n") for m in _FENCE_RE.finditer(reply) if m.group(1).strip()]


def _render_context(infos: list[ExtractedInfo]) -> str:
    if not infos:
        return ""
    sections = "\n\n".join(render_info(info) for info in infos)
    return f"\nRelevant information found online:\n{sections}\n"


def generate_initial(
    problem: ProblemSpec,
    infos: list[ExtractedInfo],
    gateway: LlmGateway,
    cfg: PipelineConfig,
) -> CodeCandidate:
    """Produce revision 0 from the description plus retrieved context.

    An empty ``infos`` list is the retrieval-ablated path: the prompt then
    contains only the problem.
    """
    prompt = render(
        "generate",
        description=problem.description,
        context=_render_context(infos),
        output_var=problem.output_var or cfg.output_var,
    )
    reply = gateway.complete(prompt, purpose="generate")
    try:
        source = parse_code_fence(reply)
    except NoCodeFound:
        retry = list(prompt) + [
            {"role": "assistant", "content": reply},
            {"role": "user", "content": "Reply again with the full solution in one fenced code block."},
        ]
        reply = gateway.complete(retry, purpose="generate-retry")
        try:
            source = parse_code_fence(reply)
        except NoCodeFound:
            raise GenerationError(
                f"problem {problem.id}: model produced no code block after one reprompt"
            ) from None
    return CodeCandidate(
        revision=0,
        source=source,
        provenance=Provenance.INITIAL,
        prompt_digest=digest(prompt),
    )


def _validated_inputs(snippets: list[str], bridge: ExecBridge, cfg: PipelineConfig) -> list[str]:
    good = []
    for snippet in snippets:
        error = bridge.smoke_run(snippet, output_var=cfg.output_var, timeout=cfg.exec_timeout)
        if error is None:
            good.append(snippet)
        else:
            log.info("dropping test input that failed smoke run: %s", error.splitlines()[-1])
    return good


def generate_test_inputs(
    problem: ProblemSpec,
    n_i: int,
    gateway: LlmGateway,
    bridge: ExecBridge,
    cfg: PipelineConfig,
) -> list[TestCaseInput]:
    """Ask for n_i input snippets, smoke-validate, regenerate once on gaps.

    Returns between 1 and n_i validated inputs; raises TestGenError when
    nothing valid survives, in which case the caller skips refinement.
    """
    if n_i < 1:
        raise ValueError("n_i must be >= 1")
    prompt = render(
        "testgen",
        description=problem.description,
        n_i=str(n_i),
        output_var=problem.output_var or cfg.output_var,
    )
    reply = gateway.complete(prompt, purpose="testgen")
    valid = _validated_inputs(parse_all_code_fences(reply)[:n_i], bridge, cfg)

    if len(valid) < n_i:
        retry = list(prompt) + [
            {"role": "assistant", "content": reply},
            {
                "role": "user",
                "content": f"Some snippets were unusable (they must run alone, without the "
                f"solution). Reply with {n_i} corrected fenced snippets.",
            },
        ]
        reply = gateway.complete(retry, purpose="testgen-retry")
        for snippet in _validated_inputs(parse_all_code_fences(reply)[:n_i], bridge, cfg):
            if snippet not in valid and len(valid) < n_i:
                valid.append(snippet)

    if not valid:
        raise TestGenError(f"problem {problem.id}: no valid test inputs after one regeneration")
    return [
        TestCaseInput(index=i + 1, setup_snippet=snippet, origin="generated")
        for i, snippet in enumerate(valid)
    ]
