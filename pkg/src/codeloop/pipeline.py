"""End-to-end orchestration: plan, search, extract, generate, test, refine.

Retrieval failures degrade gracefully (the run continues with less
context); test-generation failure skips refinement and keeps the initial
candidate, recorded as a degraded stop.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .bridge import ExecBridge, TestCaseInput
from .errors import PlanParseError, SearchUnavailable, TestGenError
from .extractor import ExtractedInfo, InfoExtractor, PageFetcher
from .gateway import LlmGateway, digest
from .planner import PlanStep, make_plan, select_queries
from .refiner import (
    STOP_BUDGET,
    STOP_DEGRADED,
    RefinementRound,
    RefinementTrace,
    refine_loop,
)
from .synthesis import generate_initial, generate_test_inputs
from .types import CodeCandidate, PipelineConfig, ProblemSpec
from .websearch import SearchClient, error_search_query

log = logging.getLogger(__name__)


@dataclass
class Services:
    """Shared, concurrency-safe clients for one run."""

    gateway: LlmGateway
    bridge: ExecBridge
    search: SearchClient | None = None
    fetcher: PageFetcher | None = None


@dataclass
class SolveResult:
    problem: ProblemSpec
    plan: list[PlanStep] | None
    infos: list[ExtractedInfo]
    final: CodeCandidate
    initial: CodeCandidate
    inputs: list[TestCaseInput]
    trace: RefinementTrace
    degraded_reason: str | None = None


def _build_error_searcher(services: Services, cfg: PipelineConfig):
    if services.search is None or services.fetcher is None:
        return None
    extractor = InfoExtractor(services.fetcher, cfg.token_budget_info)

    def search_error(error_text: str) -> ExtractedInfo | None:
        query = error_search_query(error_text)
        if not query:
            return None
        try:
            hits = services.search.search(query, 1)
        except SearchUnavailable:
            return None
        for hit in hits[:1]:
            info = extractor.gather(hit.url)
            if info is not None:
                return info
        return None

    return search_error


def _retrieve(problem: ProblemSpec, cfg: PipelineConfig, services: Services):
    """Plan-driven retrieval; every failure mode degrades to less context."""
    plan: list[PlanStep] | None = None
    infos: list[ExtractedInfo] = []
    if services.search is None or services.fetcher is None or cfg.n_q == 0:
        return plan, infos
    try:
        plan = make_plan(problem, services.gateway)
    except PlanParseError as exc:
        log.warning("problem %s: plan unparseable, skipping retrieval: %s", problem.id, exc)
        return None, infos

    extractor = InfoExtractor(services.fetcher, cfg.token_budget_info)
    for query in select_queries(plan, cfg.n_q):
        try:
            hits = services.search.search(query, cfg.n_u)
        except SearchUnavailable as exc:
            log.warning("problem %s: search degraded for %r: %s", problem.id, query, exc)
            continue
        for hit in hits:
            info = extractor.gather(hit.url)
            if info is not None:
                infos.append(info)
    return plan, infos


def solve_problem(problem: ProblemSpec, cfg: PipelineConfig, services: Services) -> SolveResult:
    plan: list[PlanStep] | None = None
    infos: list[ExtractedInfo] = []
    if cfg.use_retrieval:
        plan, infos = _retrieve(problem, cfg, services)

    w0 = generate_initial(problem, infos, services.gateway, cfg)

    inputs: list[TestCaseInput] = []
    degraded_reason: str | None = None
    if cfg.use_generated_tests:
        try:
            inputs = generate_test_inputs(problem, cfg.n_i, services.gateway, services.bridge, cfg)
        except TestGenError as exc:
            degraded_reason = str(exc)
            log.warning("problem %s: %s; refinement skipped", problem.id, exc)

    if inputs:
        error_searcher = _build_error_searcher(services, cfg) if cfg.use_error_in_refine else None
        final, trace = refine_loop(problem, w0, inputs, cfg, services.gateway, services.bridge, error_searcher)
    else:
        # No refinement possible: single-round trace records why.
        decision = STOP_DEGRADED if degraded_reason else STOP_BUDGET
        trace = RefinementTrace(rounds=(RefinementRound(w0, (), (), decision),))
        final = w0

    return SolveResult(
        problem=problem,
        plan=plan,
        infos=infos,
        final=final,
        initial=w0,
        inputs=inputs,
        trace=trace,
        degraded_reason=degraded_reason,
    )


# ---------------------------------------------------------------------------
# Artifact serialization (all content deterministic under replay)
# ---------------------------------------------------------------------------


def _dump_json(path: Path, doc: Any) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def plan_doc(plan: list[PlanStep] | None) -> Any:
    if plan is None:
        return None
    return [
        {"index": s.index, "text": s.text, "needs_search": s.needs_search, "query": s.query}
        for s in plan
    ]


def infos_doc(infos: list[ExtractedInfo]) -> list[dict[str, Any]]:
    return [
        {
            "url": info.source_url,
            "site_kind": info.site.kind.value,
            "site_id": info.site.site_id,
            "title": info.title,
            "text_blocks": list(info.text_blocks),
            "code_blocks": list(info.code_blocks),
            "truncated": info.truncated,
        }
        for info in infos
    ]


def trace_doc(trace: RefinementTrace) -> dict[str, Any]:
    rounds = []
    for rnd in trace.rounds:
        rounds.append(
            {
                "revision": rnd.candidate.revision,
                "provenance": rnd.candidate.provenance.value,
                "source": rnd.candidate.source,
                "decision": rnd.decision,
                "outcomes": [
                    {
                        "input_index": o.input_index,
                        "error": o.error,
                        "timed_out": o.timed_out,
                        "duration_ms": o.duration_ms,
                        "output": o.output_serialized.to_doc() if o.output_serialized else None,
                        "inputs": [v.to_doc() for v in o.input_serialized],
                    }
                    for o in rnd.outcomes
                ],
                "error_contexts": [
                    {
                        "error_text": ctx.error_text,
                        "search_url": ctx.search_info.source_url if ctx.search_info else None,
                    }
                    for ctx in rnd.error_contexts
                ],
            }
        )
    return {"rounds": rounds, "decision": trace.decision}


def write_solve_artifacts(out_dir: str | Path, result: SolveResult) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "final.py").write_text(result.final.source + "\n", encoding="utf-8")
    _dump_json(out / "plan.json", plan_doc(result.plan))
    _dump_json(out / "retrieved.json", infos_doc(result.infos))
    _dump_json(out / "trace.json", trace_doc(result.trace))
    _dump_json(
        out / "solve.json",
        {
            "problem_id": result.problem.id,
            "final_revision": result.final.revision,
            "decision": result.trace.decision,
            "degraded_reason": result.degraded_reason,
            "test_inputs": [i.setup_snippet for i in result.inputs],
        },
    )


def write_prompt_log(out_dir: str | Path, gateway: LlmGateway) -> None:
    """Every rendered prompt of the run, sorted by digest so the artifact is
    byte-stable across worker counts."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = sorted(
        (digest(p), [dict(m) for m in p]) for p in gateway.prompt_log
    )
    seen = set()
    with open(out / "prompts.jsonl", "w", encoding="utf-8") as f:
        for dig, messages in entries:
            if dig in seen:
                continue
            seen.add(dig)
            f.write(json.dumps({"digest": dig, "messages": messages}, sort_keys=True, ensure_ascii=False) + "\n")
