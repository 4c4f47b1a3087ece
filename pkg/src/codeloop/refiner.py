"""The correctness-testing loop: execute, gather evidence, regenerate.

Each round executes the current candidate on every test input, assembles
serialized inputs/outputs plus searched error context into a refinement
prompt (honoring the ablation toggles), and samples the next revision.
Termination: a clean run whose self-check verdict is "correct", an
unchanged reply, the round budget, or a degraded stop on gateway trouble.
The loop never returns anything worse than the initial candidate under
the clean-run-count ordering.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

from .bridge import ExecBridge, ExecutionJob, ExecutionOutcome, TestCaseInput
from .errors import (
    MissingTranscript,
    NoCodeFound,
    RunnerProtocolError,
    UpstreamError,
)
from .extractor import ExtractedInfo, render_info
from .gateway import LlmGateway, digest
from .prompts import VERDICT_TOKEN, render
from .synthesis import parse_code_fence
from .types import CodeCandidate, PipelineConfig, ProblemSpec, Provenance
from .wire import render_value

log = logging.getLogger(__name__)

CONTINUE = "continue"
STOP_CLEAN = "stop_clean"
STOP_UNCHANGED = "stop_unchanged"
STOP_BUDGET = "stop_budget"
STOP_DEGRADED = "stop_degraded"

# error_text -> info; the pipeline wires this to search + extract.
ErrorSearcher = Callable[[str], ExtractedInfo | None]


@dataclass(frozen=True)
class ErrorContext:
    error_text: str
    search_info: ExtractedInfo | None = None


@dataclass(frozen=True)
class PerInputEvidence:
    """Everything the refiner knows about one input's execution."""

    outcome: ExecutionOutcome
    error_context: ErrorContext | None


@dataclass(frozen=True)
class RefinementRound:
    candidate: CodeCandidate
    outcomes: tuple[ExecutionOutcome, ...]
    error_contexts: tuple[ErrorContext, ...]
    decision: str


@dataclass(frozen=True)
class RefinementTrace:
    rounds: tuple[RefinementRound, ...]

    @property
    def decision(self) -> str:
        return self.rounds[-1].decision


def _render_sections(evidence: list[PerInputEvidence], cfg: PipelineConfig) -> str:
    lines: list[str] = []
    for k, ev in enumerate(evidence, start=1):
        lines.append(f"--- input {k} ---")
        if ev.outcome.input_serialized:
            for value in ev.outcome.input_serialized:
                lines.append(render_value(value))
        else:
            lines.append("<input not captured>")
        if cfg.use_output_in_refine:
            lines.append(f"output {k}:")
            if ev.outcome.output_serialized is not None:
                lines.append(render_value(ev.outcome.output_serialized))
            else:
                lines.append("<none>")
        if cfg.use_error_in_refine and ev.error_context is not None:
            lines.append(f"error {k}:")
            lines.append(ev.error_context.error_text)
            if ev.error_context.search_info is not None:
                lines.append("context found for this error:")
                lines.append(render_info(ev.error_context.search_info))
        lines.append("")
    return "\n".join(lines)


def build_refinement_prompt(
    problem: ProblemSpec,
    candidate: CodeCandidate,
    evidence: list[PerInputEvidence],
    cfg: PipelineConfig,
):
    """Sections in fixed order: problem, current code, then per-input
    serialized input / output (toggle) / error with context (toggle)."""
    return render(
        "refine",
        description=problem.description,
        source=candidate.source,
        input_sections=_render_sections(evidence, cfg),
        verdict_token=VERDICT_TOKEN,
    )


def _build_selfcheck_prompt(
    problem: ProblemSpec,
    candidate: CodeCandidate,
    evidence: list[PerInputEvidence],
    cfg: PipelineConfig,
):
    return render(
        "selfcheck",
        description=problem.description,
        source=candidate.source,
        input_sections=_render_sections(evidence, cfg),
    )


def _parse_verdict(reply: str) -> bool:
    upper = reply.upper()
    if "INCORRECT" in upper:
        return False
    return "CORRECT" in upper


def _declares_unchanged(reply: str) -> bool:
    # A verdict-token reply with no code block asserts "keep the code".
    return VERDICT_TOKEN in reply and "```" not in reply


def _clean_count(outcomes: tuple[ExecutionOutcome, ...]) -> int:
    return sum(1 for o in outcomes if o.error is None)


def _best_candidate(
    executed: list[tuple[CodeCandidate, tuple[ExecutionOutcome, ...]]],
) -> CodeCandidate:
    """Highest clean-run count wins; ties go to the earliest round, so an
    adversarial refinement can never displace the initial candidate."""
    best, best_outcomes = executed[0]
    best_n = _clean_count(best_outcomes)
    for cand, outcomes in executed[1:]:
        n = _clean_count(outcomes)
        if n > best_n:
            best, best_n = cand, n
    return best


def refine_loop(
    problem: ProblemSpec,
    w0: CodeCandidate,
    inputs: list[TestCaseInput],
    cfg: PipelineConfig,
    gateway: LlmGateway,
    bridge: ExecBridge,
    error_searcher: ErrorSearcher | None = None,
) -> tuple[CodeCandidate, RefinementTrace]:
    """Run at most n_f refinement rounds starting from ``w0``.

    Gateway calls are bounded by 2*n_f + 1 (one self-check per clean round,
    one regeneration per non-final round); the trace holds at most n_f + 1
    rounds, the last one carrying the stop decision.
    """
    if not inputs:
        raise ValueError("refine_loop needs at least one test input")

    if not (cfg.use_output_in_refine or cfg.use_error_in_refine):
        # Ablated to nothing: no execution, no rounds, initial code stands.
        trace = RefinementTrace(rounds=(RefinementRound(w0, (), (), STOP_BUDGET),))
        return w0, trace

    rounds: list[RefinementRound] = []
    executed: list[tuple[CodeCandidate, tuple[ExecutionOutcome, ...]]] = []
    search_memo: dict[str, ExtractedInfo | None] = {}
    candidate = w0

    def finish(outcomes, contexts, decision, chosen=None):
        rounds.append(RefinementRound(candidate, tuple(outcomes), tuple(contexts), decision))
        trace = RefinementTrace(rounds=tuple(rounds))
        final = chosen if chosen is not None else (_best_candidate(executed) if executed else w0)
        return final, trace

    for j in range(cfg.n_f + 1):
        try:
            outcomes = tuple(
                bridge.run_candidate(
                    ExecutionJob(
                        candidate=candidate,
                        inputs=tuple(inputs),
                        output_var=problem.output_var or cfg.output_var,
                        serialize=cfg.use_serialization,
                        timeout=cfg.exec_timeout,
                        capture_figures=cfg.use_serialization,
                    )
                )
            )
        except (RunnerProtocolError, EnvironmentError) as exc:
            log.warning("problem %s round %d: execution failed: %s", problem.id, j, exc)
            return finish((), (), STOP_DEGRADED)
        executed.append((candidate, outcomes))

        contexts: list[ErrorContext] = []
        evidence: list[PerInputEvidence] = []
        for outcome in outcomes:
            ctx = None
            if outcome.error is not None:
                info = None
                if cfg.use_error_in_refine and error_searcher is not None:
                    if outcome.error not in search_memo:
                        search_memo[outcome.error] = error_searcher(outcome.error)
                    info = search_memo[outcome.error]
                ctx = ErrorContext(error_text=outcome.error, search_info=info)
                contexts.append(ctx)
            evidence.append(PerInputEvidence(outcome=outcome, error_context=ctx))

        try:
            if all(o.error is None for o in outcomes):
                verdict_reply = gateway.complete(
                    _build_selfcheck_prompt(problem, candidate, evidence, cfg),
                    purpose="selfcheck",
                )
                if _parse_verdict(verdict_reply):
                    return finish(outcomes, contexts, STOP_CLEAN, chosen=candidate)

            if j == cfg.n_f:
                return finish(outcomes, contexts, STOP_BUDGET)

            prompt = build_refinement_prompt(problem, candidate, evidence, cfg)
            reply = gateway.complete(prompt, purpose="refine")
        except (UpstreamError, MissingTranscript) as exc:
            log.warning("problem %s round %d: gateway failed: %s", problem.id, j, exc)
            return finish(outcomes, contexts, STOP_DEGRADED)

        if _declares_unchanged(reply):
            return finish(outcomes, contexts, STOP_UNCHANGED)
        try:
            source = parse_code_fence(reply)
        except NoCodeFound:
            log.warning("problem %s round %d: unparseable refine reply", problem.id, j)
            return finish(outcomes, contexts, STOP_DEGRADED)
        if source == candidate.source:
            return finish(outcomes, contexts, STOP_UNCHANGED)

        rounds.append(RefinementRound(candidate, outcomes, tuple(contexts), CONTINUE))
        candidate = CodeCandidate(
            revision=j + 1,
            source=source,
            provenance=Provenance.REFINED,
            prompt_digest=digest(prompt),
        )

    raise AssertionError("unreachable: loop always returns at j == n_f")
